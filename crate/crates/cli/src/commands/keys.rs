use std::path::PathBuf;

use clap::{Args, Subcommand};
use vamp_core::crypto::{generate_keypair, issue_certificate, Issuer, SignatureAlgorithm, Validity};
use vamp_core::timestamp::now;

use crate::error::{CliError, CliResult};
use crate::files;
use crate::{Global, OutputMode};

#[derive(Args)]
pub struct KeygenArgs {
    #[arg(long)]
    pub subject: String,
    /// Writes OUT.key and OUT.cert. Defaults to the subject name.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "ed25519")]
    pub algorithm: SignatureAlgorithm,
    #[arg(long, conflicts_with_all = ["issuer_key", "issuer_cert"])]
    pub self_signed: bool,
    #[arg(long, requires = "issuer_cert")]
    pub issuer_key: Option<PathBuf>,
    #[arg(long, requires = "issuer_key")]
    pub issuer_cert: Option<PathBuf>,
    /// Certificate lifetime.
    #[arg(long, default_value_t = 365)]
    pub days: i64,
    #[arg(long)]
    pub force: bool,
}

#[derive(Subcommand)]
pub enum TrustCommand {
    /// Copy a root certificate into the trust directory.
    Add { cert: PathBuf },
    /// List trusted roots.
    List,
}

pub fn keygen(global: &Global, args: &KeygenArgs) -> CliResult {
    if !args.self_signed && args.issuer_key.is_none() {
        return Err(CliError::usage("pass --self-signed or --issuer-key with --issuer-cert"));
    }
    let prefix = args.out.clone().unwrap_or_else(|| PathBuf::from(&args.subject));
    let key_path = files::with_suffix(&prefix, ".key");
    let cert_path = files::with_suffix(&prefix, ".cert");
    if !args.force {
        for p in [&key_path, &cert_path] {
            if p.exists() {
                return Err(CliError::usage(format!(
                    "{} already exists (use --force to overwrite)",
                    p.display()
                )));
            }
        }
    }

    let t = now();
    let key = generate_keypair(args.algorithm);
    let validity = Validity::days_from(t, args.days);
    let cert = match (&args.issuer_key, &args.issuer_cert) {
        (Some(ik), Some(ic)) => {
            let issuer_key = files::private_key(ik)?;
            let issuer_cert = files::certificate(ic)?;
            issue_certificate(
                &args.subject,
                &key.public_key(),
                validity,
                Issuer::Certificate {
                    key: &issuer_key,
                    cert: &issuer_cert,
                },
                t,
            )
        }
        _ => issue_certificate(&args.subject, &key.public_key(), validity, Issuer::SelfSigned(&key), t),
    }
    .map_err(|e| CliError::usage(format!("cannot issue certificate: {e}")))?;

    files::write_secret(&key_path, &key.to_keystore_bytes(), args.force)?;
    files::write(&cert_path, &cert.to_json_bytes(), args.force)?;
    match global.output {
        OutputMode::Json => files::print_json(&serde_json::json!({
            "subject": cert.subject,
            "issuer": cert.issuer,
            "key": key_path,
            "certificate": cert_path,
        })),
        OutputMode::Human => {
            println!("key:         {}", key_path.display());
            println!("certificate: {} (subject {:?}, issuer {:?})", cert_path.display(), cert.subject, cert.issuer);
        }
    }
    Ok(())
}

pub fn trust(global: &Global, cmd: &TrustCommand) -> CliResult {
    match cmd {
        TrustCommand::Add { cert } => {
            let parsed = files::certificate(cert)?;
            if !parsed.self_signed {
                eprintln!("warning: {:?} is not self-signed", parsed.subject);
            }
            let name = cert
                .file_name()
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("root.cert"));
            let dest = global.trust_dir.join(name);
            files::write(&dest, &parsed.to_json_bytes(), true)?;
            if global.output == OutputMode::Human {
                println!("trusted {:?} in {}", parsed.subject, dest.display());
            }
            Ok(())
        }
        TrustCommand::List => {
            let store = files::trust_store(&global.trust_dir)?;
            let subjects: Vec<&str> = store.roots().iter().map(|c| c.subject.as_str()).collect();
            match global.output {
                OutputMode::Json => files::print_json(&serde_json::json!({ "roots": subjects })),
                OutputMode::Human => subjects.iter().for_each(|s| println!("{s}")),
            }
            Ok(())
        }
    }
}
