use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use clap::Args;
use vamp_core::binding::{
    bind_fixed_chunks, bind_fixed_records, bind_minibatches, bind_record_merkle, bind_static,
    BindingSet,
};
use vamp_core::codec::Format;
use vamp_core::container::{extract_path, open_payload};
use vamp_core::crypto::{sign_manifest, HashAlgorithm};
use vamp_core::manifest::{
    canonical_serialize, compute_manifest_id, parse_manifest_with, FacsimileRef, Manifest,
    ManifestId, ObjectType, ParseMode,
};
use vamp_core::timestamp::{format_utc, now};

use crate::error::{CliError, CliResult};
use crate::files;
use crate::{Global, OutputMode, Serialization};

#[derive(Args)]
pub struct CreateArgs {
    #[arg(long)]
    pub object: PathBuf,
    #[arg(long)]
    pub object_id: String,
    #[arg(long = "type")]
    pub object_type: ObjectType,
    /// static, chunk:N, minibatch:B, records:LxB or record-merkle. Repeatable.
    #[arg(long = "bind")]
    pub bindings: Vec<String>,
    /// Record delimiter for minibatch and record-merkle bindings.
    #[arg(long, default_value = "\\n")]
    pub delimiter: String,
    #[arg(long = "origin")]
    pub origins: Vec<ManifestId>,
    /// MANIFEST_ID:RELATION. Repeatable.
    #[arg(long = "facsimile")]
    pub facsimiles: Vec<String>,
    #[arg(long, default_value = "application/octet-stream")]
    pub encoding: String,
    /// Where the master copy of the object lives.
    #[arg(long)]
    pub locator: Option<String>,
    #[arg(long)]
    pub copyright: Option<String>,
    #[arg(long)]
    pub transformation: Option<String>,
    #[arg(long, default_value = "sha2-256")]
    pub hash: HashAlgorithm,
    /// Overrides the creation time (YYYY-MM-DDTHH:MM:SSZ).
    #[arg(long)]
    pub created_at: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Serialization,
    /// Defaults to FILE.manifest.json or FILE.manifest.cbor.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args)]
pub struct SignArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
    /// Certificate chain, leaf first. Repeatable.
    #[arg(long = "cert", required = true)]
    pub certs: Vec<PathBuf>,
    /// Envelope format. Defaults to the manifest's own format.
    #[arg(long, value_enum)]
    pub format: Option<Serialization>,
    /// Defaults to X.man for X.manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

fn unescape(s: &str) -> Vec<u8> {
    let mut out = Vec::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            let mut buf = [0; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            continue;
        }
        match chars.next() {
            Some('n') => out.push(b'\n'),
            Some('r') => out.push(b'\r'),
            Some('t') => out.push(b'\t'),
            Some('0') => out.push(0),
            Some('\\') | None => out.push(b'\\'),
            Some(other) => {
                out.push(b'\\');
                let mut buf = [0; 4];
                out.extend_from_slice(other.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    out
}

fn parse_u64(spec: &str, what: &str) -> CliResult<u64> {
    what.parse()
        .map_err(|_| CliError::usage(format!("--bind {spec}: {what:?} is not a number")))
}

/// Opens the object's payload region, skipping any container header.
fn payload(path: &Path) -> CliResult<Box<dyn Read>> {
    let header = extract_path(path).map_err(|e| CliError::env(format!("{}: {e}", path.display())))?;
    if header.is_bare() {
        Ok(Box::new(BufReader::new(File::open(path)?)))
    } else {
        Ok(Box::new(open_payload(path, &header)?))
    }
}

pub fn compute_binding(
    path: &Path,
    spec: &str,
    delimiter: &[u8],
    alg: HashAlgorithm,
) -> CliResult<BindingSet> {
    let r = payload(path)?;
    let set = match spec.split_once(':') {
        None if spec == "static" => bind_static(r, alg),
        None if spec == "record-merkle" => bind_record_merkle(r, delimiter, alg),
        Some(("chunk", n)) => bind_fixed_chunks(r, parse_u64(spec, n)?, alg),
        Some(("minibatch", b)) => bind_minibatches(r, delimiter, parse_u64(spec, b)?, alg),
        Some(("records", lb)) => {
            let (l, b) = lb
                .split_once('x')
                .ok_or_else(|| CliError::usage(format!("--bind {spec}: expected records:LENxBATCH")))?;
            bind_fixed_records(r, parse_u64(spec, l)?, parse_u64(spec, b)?, alg)
        }
        _ => return Err(CliError::usage(format!("unknown binding {spec:?}"))),
    };
    set.map_err(|e| match e {
        vamp_core::binding::BindingError::Io(e) => CliError::env(e),
        other => CliError::usage(format!("--bind {spec}: {other}")),
    })
}

fn parse_facsimile(s: &str) -> CliResult<FacsimileRef> {
    let (id, rel) = s
        .rsplit_once(':')
        .ok_or_else(|| CliError::usage(format!("--facsimile {s:?}: expected MANIFEST_ID:RELATION")))?;
    Ok(FacsimileRef {
        manifest_id: id.parse().map_err(|e| CliError::usage(format!("--facsimile: {e}")))?,
        relation: rel.parse().map_err(|e| CliError::usage(format!("--facsimile: {e}")))?,
        note: None,
    })
}

pub fn create(global: &Global, args: &CreateArgs) -> CliResult {
    let specs = if args.bindings.is_empty() {
        vec!["static".to_owned()]
    } else {
        args.bindings.clone()
    };
    let delimiter = unescape(&args.delimiter);
    let mut bindings = Vec::with_capacity(specs.len());
    for spec in &specs {
        let set = compute_binding(&args.object, spec, &delimiter, args.hash)?;
        if bindings.iter().any(|b: &BindingSet| b.name == set.name) {
            return Err(CliError::usage(format!("duplicate binding {:?}", set.name)));
        }
        bindings.push(set);
    }
    let created_at = match &args.created_at {
        Some(t) => format_utc(super::at_time(Some(t))?),
        None => format_utc(now()),
    };
    let mut m = Manifest::new(&args.object_id, args.object_type, &args.encoding, created_at, bindings);
    m.master_copy_locator = args.locator.clone();
    m.copyright = args.copyright.clone();
    m.transformation = args.transformation.clone();
    m.origin_manifest_ids = args.origins.clone();
    m.facsimiles = args
        .facsimiles
        .iter()
        .map(|s| parse_facsimile(s))
        .collect::<CliResult<_>>()?;

    let format: Format = args.format.into();
    let bytes = canonical_serialize(&m, format).map_err(CliError::usage)?;
    let id = compute_manifest_id(&m).map_err(CliError::usage)?;
    let out = args.out.clone().unwrap_or_else(|| {
        files::with_suffix(&args.object, &format!(".manifest.{}", format.as_str().to_ascii_lowercase()))
    });
    files::write(&out, &bytes, args.force)?;
    match global.output {
        OutputMode::Json => files::print_json(&serde_json::json!({
            "manifestId": id.as_str(),
            "path": out,
            "bindings": m.bindings.iter().map(|b| b.name.as_str()).collect::<Vec<_>>(),
        })),
        OutputMode::Human => {
            println!("{id}");
            println!("wrote {} ({} binding sets)", out.display(), m.bindings.len());
        }
    }
    Ok(())
}

/// Reads an unsigned manifest in either format.
fn read_manifest(path: &Path) -> CliResult<(Manifest, Format)> {
    let bytes = files::read(path)?;
    let format = match bytes.first() {
        Some(b'{') => Format::Json,
        _ => Format::Cbor,
    };
    let parsed = parse_manifest_with(&bytes, format, ParseMode::Lenient)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    if !parsed.canonical {
        eprintln!("warning: {} is not canonical; signing the canonical form", path.display());
    }
    Ok((parsed.manifest, format))
}

pub fn sign(global: &Global, args: &SignArgs) -> CliResult {
    let (manifest, own_format) = read_manifest(&args.manifest)?;
    let format = args.format.map(Format::from).unwrap_or(own_format);
    let key = files::private_key(&args.key)?;
    let chain = args
        .certs
        .iter()
        .map(|p| files::certificate(p))
        .collect::<CliResult<Vec<_>>>()?;
    let env = sign_manifest(&manifest, format, &key, &chain).map_err(CliError::usage)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| files::default_envelope_path(&args.manifest));
    files::write(&out, &env.to_bytes(), args.force)?;
    let id = env.manifest_id().map_err(CliError::usage)?;
    match global.output {
        OutputMode::Json => files::print_json(&serde_json::json!({
            "manifestId": id.as_str(),
            "envelope": out,
            "signer": env.signer_subject(),
        })),
        OutputMode::Human => {
            println!("{id}");
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delimiter_escapes() {
        assert_eq!(unescape("\\n"), b"\n");
        assert_eq!(unescape("\\r\\n"), b"\r\n");
        assert_eq!(unescape("|"), b"|");
        assert_eq!(unescape("a\\"), b"a\\");
    }

    #[test]
    fn facsimile_splits_at_last_colon() {
        let id = ManifestId::from_digest_bytes(&[7; 32]);
        let f = parse_facsimile(&format!("{id}:split-of")).unwrap();
        assert_eq!(f.manifest_id, id);
        assert_eq!(f.relation.as_str(), "split-of");
        assert!(parse_facsimile("nocolon").is_err());
    }
}
