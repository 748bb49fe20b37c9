//! Acceptance checks. Runs as a plain binary so each criterion prints one
//! line whatever the outcome; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::Workspace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vamp_core::binding::{
    bind_minibatches, bind_record_merkle, record_range_proof, verify_binding,
    verify_minibatch_range, BindingBody, BindingSet, BoxEntry,
};
use vamp_core::codec::Format;
use vamp_core::container::{detached_manifest_path, embed_manifest, extract, ContainerKind};
use vamp_core::crypto::{
    generate_keypair, Digest, HashAlgorithm, PublicKey, SignatureAlgorithm, SignedManifest,
};
use vamp_core::ledger::{verify_consistency, verify_receipt, Ledger, Receipt};
use vamp_core::manifest::{
    canonical_serialize, compute_manifest_id, parse_manifest, validate_manifest, FacsimileRef,
    FacsimileRelation, Manifest, ManifestId, ObjectType,
};
use vamp_core::merkle;
use vamp_core::timestamp::format_utc;
use vamp_registry::RegistryClient;

const TAMPER_BUDGET: Duration = Duration::from_secs(60);
const POISON_BUDGET: Duration = Duration::from_secs(10);
const LEDGER_BUDGET: Duration = Duration::from_secs(30);
const MUTATIONS: usize = 200;
const RANDOM_MANIFESTS: usize = 1000;
const MAX_LEDGER_SIZE: usize = 64;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn records(data: &[u8]) -> Vec<&[u8]> {
    data.split_inclusive(|&b| b == b'\n').collect()
}

/// Tree hash straight from the definition, over raw entries.
fn tree_hash(entries: &[&[u8]]) -> Vec<u8> {
    use sha2::{Digest as _, Sha256};
    match entries.len() {
        0 => Sha256::digest(b"").to_vec(),
        1 => Sha256::new().chain_update([0]).chain_update(entries[0]).finalize().to_vec(),
        n => {
            let k = if n.is_power_of_two() { n / 2 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
            Sha256::new()
                .chain_update([1])
                .chain_update(tree_hash(&entries[..k]))
                .chain_update(tree_hash(&entries[k..]))
                .finalize()
                .to_vec()
        }
    }
}

fn csv_dataset(rng: &mut ChaCha20Rng, min_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(min_len + 64);
    let mut i = 0u64;
    while out.len() < min_len {
        let cols: Vec<String> = (0..rng.gen_range(2..8)).map(|_| rng.gen_range(0..100_000).to_string()).collect();
        out.extend_from_slice(format!("{i},{}\n", cols.join(",")).as_bytes());
        i += 1;
    }
    out
}

fn failing_units(report: &serde_json::Value, name: &str) -> Vec<u64> {
    report["bindings"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["name"] == name)
        .unwrap_or_else(|| panic!("no binding {name} in report"))["failingUnits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect()
}

fn tamper_evidence() -> Outcome {
    let start = Instant::now();
    let ws = Workspace::new();
    let mut rng = ChaCha20Rng::seed_from_u64(0x7a3f);
    let data = csv_dataset(&mut rng, 1 << 20);
    let data = data[..1 << 20].to_vec();
    ws.write("data.csv", &data);
    ws.sign_object("data.csv", "fixture-1mib", "dataset", &["--bind", "static", "--bind", "chunk:4096", "--bind", "minibatch:64"]);

    let mut box_starts = Vec::new();
    let mut at = 0;
    for (i, r) in records(&data).iter().enumerate() {
        if i % 64 == 0 {
            box_starts.push(at);
        }
        at += r.len();
    }

    let verify = || ws.run(["--output", "json", "verify", "--object", "data.csv"]);
    let clean = verify();
    check(clean.code == 0, || format!("untampered file failed: {}", clean.stdout))?;

    let path = ws.path("data.csv");
    let mut false_negatives = 0;
    let mut wrong_units = Vec::new();
    for _ in 0..MUTATIONS {
        let off = rng.gen_range(0..data.len());
        let mask: u8 = rng.gen_range(1..=255);
        let mut bytes = data.clone();
        bytes[off] ^= mask;
        fs::write(&path, &bytes).unwrap();
        let r = verify();
        if r.code != 1 {
            false_negatives += 1;
            continue;
        }
        let report = r.json();
        let chunk = failing_units(&report, "chunk:4096");
        let boxes = failing_units(&report, "minibatch:64");
        let expected_box = box_starts.iter().rposition(|&s| s <= off).unwrap() as u64;
        if chunk != [off as u64 / 4096] || boxes != [expected_box] || failing_units(&report, "static") != [] as [u64; 0] {
            wrong_units.push((off, chunk, boxes));
        }
        if report["bindings"].as_array().unwrap().iter().any(|b| b["passed"] == true) {
            wrong_units.push((off, vec![], vec![]));
        }
    }
    fs::write(&path, &data).unwrap();
    let after = verify();
    let false_positives = usize::from(clean.code != 0) + usize::from(after.code != 0);
    let elapsed = start.elapsed();
    check(false_negatives == 0, || format!("{false_negatives} mutations went undetected"))?;
    check(wrong_units.is_empty(), || format!("wrong unit indices: {:?}", &wrong_units[..wrong_units.len().min(3)]))?;
    check(false_positives == 0, || "untampered file failed verification".into())?;
    check(elapsed < TAMPER_BUDGET, || format!("took {elapsed:.1?}, budget {TAMPER_BUDGET:?}"))?;
    Ok(format!("{MUTATIONS} mutations, 0 false negatives, 0 false positives, unit indices exact, {elapsed:.1?}"))
}

fn closure_failures(ws: &Workspace, model: &str) -> (i32, BTreeSet<String>) {
    let r = ws.run(["--output", "json", "verify", "--object", model, "--closure", "--search", "src", "--search", "pkg"]);
    let failed = r.json()["closure"]["nodes"]
        .as_array()
        .map(|nodes| {
            nodes
                .iter()
                .filter(|n| n["status"] == "FAILED")
                .map(|n| n["id"].as_str().unwrap().to_owned())
                .collect()
        })
        .unwrap_or_default();
    (r.code, failed)
}

fn software_and_model_poisoning() -> Outcome {
    let start = Instant::now();
    let ws = Workspace::new();
    let mut rng = ChaCha20Rng::seed_from_u64(0x50f7);
    ws.write("src/train.py", b"import model\n\ndef fit(data):\n    return model.train(data, epochs=3)\n");
    let mut blob = vec![0u8; 64 * 1024];
    rng.fill(&mut blob[..]);
    ws.write("pkg/mathlib.whl", &blob);
    let src = ws.sign_object("src/train.py", "train.py", "code", &["--bind", "static", "--bind", "chunk:16"]);
    let pkg = ws.sign_object("pkg/mathlib.whl", "mathlib-1.0", "package", &["--bind", "chunk:4096"]);
    let mut weights = vec![0u8; 32 * 1024];
    rng.fill(&mut weights[..]);
    ws.write("model.bin", &weights);
    let model = ws.sign_object("model.bin", "classifier", "model", &["--bind", "static", "--origin", &src, "--origin", &pkg]);

    let (code, failed) = closure_failures(&ws, "model.bin");
    check(code == 0 && failed.is_empty(), || format!("untampered closure failed: exit {code}, {failed:?}"))?;

    for (file, id) in [("src/train.py", &src), ("pkg/mathlib.whl", &pkg), ("model.bin", &model)] {
        let original = ws.read(file);
        let mut bad = original.clone();
        let off = rng.gen_range(0..bad.len());
        bad[off] ^= 0x40;
        ws.write(file, &bad);
        let (code, failed) = closure_failures(&ws, "model.bin");
        ws.write(file, &original);
        check(code == 1, || format!("mutating {file} gave exit {code}"))?;
        check(failed == BTreeSet::from([id.clone()]), || format!("mutating {file} failed {failed:?}, expected only {id}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < POISON_BUDGET, || format!("took {elapsed:.1?}, budget {POISON_BUDGET:?}"))?;
    Ok(format!("source, package and model each flagged alone, clean closure passes, {elapsed:.1?}"))
}

fn random_text(rng: &mut ChaCha20Rng) -> String {
    const POOL: &[char] = &['a', 'Z', '0', ' ', '"', '\\', '/', '\n', '\t', '\u{1}', '\u{1f}', '\u{7f}', 'é', 'ß', '中', '😀', '\u{2028}', ':', '{', '}'];
    let n = rng.gen_range(1..20);
    (0..n)
        .map(|_| if rng.gen_bool(0.2) { char::from_u32(rng.gen_range(0x20..0xd7ff)).unwrap() } else { POOL[rng.gen_range(0..POOL.len())] })
        .collect()
}

fn random_digest(rng: &mut ChaCha20Rng, alg: HashAlgorithm) -> Digest {
    let mut v = vec![0u8; alg.output_len()];
    rng.fill(&mut v[..]);
    Digest::new(alg, v).unwrap()
}

fn random_binding(rng: &mut ChaCha20Rng, name: String) -> BindingSet {
    let alg = if rng.gen_bool(0.7) { HashAlgorithm::Sha256 } else { HashAlgorithm::Sha512 };
    let body = match rng.gen_range(0..4) {
        0 => BindingBody::Static { digest: random_digest(rng, alg) },
        1 => {
            let chunk_size = rng.gen_range(1..100_000u64);
            let total_length = rng.gen_range(0..chunk_size * 6);
            let digests = (0..total_length.div_ceil(chunk_size)).map(|_| random_digest(rng, alg)).collect();
            BindingBody::FixedChunk { chunk_size, total_length, digests }
        }
        2 => {
            let mut offset = 0;
            let boxes = (0..rng.gen_range(0..6))
                .map(|_| {
                    let length = rng.gen_range(1..u32::MAX as u64 * 4);
                    let b = BoxEntry { offset, length, digest: random_digest(rng, alg) };
                    offset += length;
                    b
                })
                .collect();
            BindingBody::Box { boxes }
        }
        _ => BindingBody::RecordMerkle {
            record_delimiter: (0..rng.gen_range(1..4)).map(|_| rng.gen()).collect(),
            leaf_count: rng.gen_range(0..u64::MAX),
            root: random_digest(rng, alg),
        },
    };
    BindingSet { name, hash_algorithm: alg, body }
}

fn random_manifest(rng: &mut ChaCha20Rng) -> Manifest {
    let n = rng.gen_range(1..5);
    let bindings = (0..n)
        .map(|i| {
            let name = format!("{i}:{}", random_text(rng));
            random_binding(rng, name)
        })
        .collect();
    let created = chrono::DateTime::from_timestamp(rng.gen_range(0..4_102_444_800), 0).unwrap();
    let mut m = Manifest::new(
        random_text(rng),
        ObjectType::ALL[rng.gen_range(0..ObjectType::ALL.len())],
        random_text(rng),
        format_utc(created),
        bindings,
    );
    let opt = |rng: &mut ChaCha20Rng| rng.gen_bool(0.5).then(|| random_text(rng));
    m.master_copy_locator = opt(rng);
    m.copyright = opt(rng);
    m.transformation = opt(rng);
    let origins: BTreeSet<[u8; 32]> = (0..rng.gen_range(0..4)).map(|_| rng.gen()).collect();
    m.origin_manifest_ids = origins.iter().map(|b| ManifestId::from_digest_bytes(b)).collect();
    m.facsimiles = (0..rng.gen_range(0..3))
        .map(|_| FacsimileRef {
            manifest_id: ManifestId::from_digest_bytes(&rng.gen::<[u8; 32]>()),
            relation: FacsimileRelation::ALL[rng.gen_range(0..FacsimileRelation::ALL.len())],
            note: opt(rng),
        })
        .collect();
    m
}

fn canonicalization() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0xc4a0);
    let mut mismatches = Vec::new();
    for i in 0..RANDOM_MANIFESTS {
        let m = random_manifest(&mut rng);
        if !validate_manifest(&m).is_valid() {
            return Err(format!("generator produced an invalid manifest: {}", validate_manifest(&m)));
        }
        let json = canonical_serialize(&m, Format::Json).unwrap();
        let cbor = canonical_serialize(&m, Format::Cbor).unwrap();
        let from_json = parse_manifest(&json, Format::Json);
        let from_cbor = parse_manifest(&cbor, Format::Cbor);
        let (Ok(a), Ok(b)) = (from_json, from_cbor) else {
            mismatches.push(format!("#{i}: did not parse back"));
            continue;
        };
        // serde_json keeps object keys sorted and writes compact output, so
        // re-serializing through it is an independent check of the form.
        let reserialized = serde_json::to_vec(&serde_json::from_slice::<serde_json::Value>(&json).unwrap()).unwrap();
        let oracle_id = {
            use sha2::{Digest as _, Sha256};
            format!("sha2-256:{:x}", Sha256::digest(&json))
        };
        let ok = a == m
            && b == m
            && canonical_serialize(&a, Format::Json).unwrap() == json
            && canonical_serialize(&b, Format::Cbor).unwrap() == cbor
            && canonical_serialize(&b, Format::Json).unwrap() == json
            && reserialized == json
            && compute_manifest_id(&a).unwrap() == compute_manifest_id(&b).unwrap()
            && compute_manifest_id(&b).unwrap().as_str() == oracle_id;
        if !ok {
            mismatches.push(format!("#{i}"));
        }
    }
    check(mismatches.is_empty(), || format!("{} mismatches: {:?}", mismatches.len(), &mismatches[..mismatches.len().min(5)]))?;
    Ok(format!("{RANDOM_MANIFESTS} manifests, JSON and CBOR byte-stable, ids format-independent, 0 mismatches"))
}

fn multi_minibatch() -> Outcome {
    let ws = Workspace::new();
    let mut rng = ChaCha20Rng::seed_from_u64(0xb7c4);
    let data: Vec<u8> = (0..1000)
        .flat_map(|i| format!("{i},{},{}\n", rng.gen_range(0..1000), "x".repeat(rng.gen_range(0..40))).into_bytes())
        .collect();
    ws.write("records.csv", &data);
    ws.sign_object("records.csv", "records", "dataset", &["--bind", "minibatch:16", "--bind", "minibatch:64", "--bind", "minibatch:256"]);
    let r = ws.run(["--output", "json", "verify", "--object", "records.csv"]);
    check(r.code == 0, || format!("multi-minibatch verify failed: {}", r.stdout))?;
    check(r.json()["bindings"].as_array().unwrap().len() == 3, || "expected three binding reports".into())?;
    for b in [16u64, 64, 256] {
        let set = bind_minibatches(&data[..], b"\n", b, HashAlgorithm::Sha256).unwrap();
        let BindingBody::Box { boxes } = &set.body else { unreachable!() };
        check(boxes.len() as u64 == 1000u64.div_ceil(b), || format!("B={b}: {} boxes", boxes.len()))?;
        check(verify_binding(&data[..], &set).unwrap().passed, || format!("B={b} does not verify"))?;
    }

    let small: Vec<u8> = (0..32).flat_map(|i| format!("record {i:02}\n").into_bytes()).collect();
    let recs = records(&small);
    let set = bind_record_merkle(&small[..], b"\n", HashAlgorithm::Sha256).unwrap();
    let BindingBody::RecordMerkle { root, .. } = &set.body else { unreachable!() };
    check(root.as_bytes() == tree_hash(&recs).as_slice(), || "root differs from full-tree oracle".into())?;
    let mut checked = 0;
    for b in 1..=8usize {
        for s in 0..=(32 - b) {
            let e = s + b;
            let proof = record_range_proof(&small[..], b"\n", HashAlgorithm::Sha256, s as u64, e as u64).unwrap();
            let honest = verify_minibatch_range(&set, s as u64, e as u64, &recs[s..e], &proof).unwrap();
            let mut forged: Vec<Vec<u8>> = recs[s..e].iter().map(|r| r.to_vec()).collect();
            let k = rng.gen_range(0..forged.len());
            forged[k][0] ^= 1;
            let forged_ok = verify_minibatch_range(&set, s as u64, e as u64, &forged, &proof).unwrap();
            let mut substituted: Vec<&[u8]> = recs.clone();
            for (i, f) in forged.iter().enumerate() {
                substituted[s + i] = f;
            }
            let oracle_honest = tree_hash(&recs) == root.as_bytes();
            let oracle_forged = tree_hash(&substituted) == root.as_bytes();
            check(honest == oracle_honest && forged_ok == oracle_forged, || {
                format!("B={b} range [{s},{e}): proof says {honest}/{forged_ok}, oracle {oracle_honest}/{oracle_forged}")
            })?;
            checked += 1;
        }
    }
    Ok(format!("B in {{16,64,256}} verify over 1000 records; {checked} range proofs agree with the full-tree oracle"))
}

fn sign_heads_for(entries: &[Vec<u8>], key_seed: u8) -> (Ledger, PublicKey) {
    let key = vamp_core::crypto::PrivateKey::from_secret_bytes(SignatureAlgorithm::Ed25519, &[key_seed; 32]).unwrap();
    let pk = key.public_key();
    let mut l = Ledger::in_memory(key);
    for e in entries {
        l.append(e).unwrap();
    }
    (l, pk)
}

fn ledger_soundness() -> Outcome {
    let start = Instant::now();
    let entries: Vec<Vec<u8>> = (0..MAX_LEDGER_SIZE).map(|i| format!("sha2-256:{i:064x}").into_bytes()).collect();
    let (ledger, pk) = sign_heads_for(&entries, 7);
    let refs: Vec<&[u8]> = entries.iter().map(Vec::as_slice).collect();
    let mut proofs = 0;
    for n in 1..=MAX_LEDGER_SIZE {
        let head = ledger.head_at(n as u64).unwrap();
        check(head.verify(&pk), || format!("head {n} signature"))?;
        check(head.root_hash.as_bytes() == tree_hash(&refs[..n]).as_slice(), || format!("root at size {n} differs from oracle"))?;
        for i in 0..n {
            let r = ledger.prove_inclusion(i as u64, n as u64).unwrap();
            let oracle_leaf = merkle::leaf_hash(HashAlgorithm::Sha256, refs[i]);
            check(verify_receipt(&r, &pk) && r.leaf_hash == oracle_leaf, || format!("inclusion {i} in {n}"))?;
            let mut bad = r.clone();
            bad.sequence = (i as u64 + 1) % n as u64;
            if n > 1 {
                check(!verify_receipt(&bad, &pk), || format!("moved receipt {i} in {n} accepted"))?;
            }
            proofs += 1;
        }
        for m in 1..=n {
            let old = ledger.head_at(m as u64).unwrap();
            let proof = ledger.prove_consistency(m as u64, n as u64).unwrap();
            check(verify_consistency(&old, &head, &proof), || format!("consistency {m} -> {n}"))?;
            proofs += 1;
        }
    }

    let honest_heads: Vec<_> = (0..=MAX_LEDGER_SIZE).map(|n| ledger.head_at(n as u64).unwrap()).collect();
    let mut forks = 0;
    for j in 0..MAX_LEDGER_SIZE {
        let mut forked = entries.clone();
        forked[j] = b"substituted".to_vec();
        let (fork, _) = sign_heads_for(&forked, 7);
        for m in (j + 1)..=MAX_LEDGER_SIZE {
            let forked_old = fork.head_at(m as u64).unwrap();
            for n in m..=MAX_LEDGER_SIZE {
                let honest_new = &honest_heads[n];
                let proof = ledger.prove_consistency(m as u64, n as u64).unwrap();
                check(!verify_consistency(&forked_old, honest_new, &proof), || format!("fork at {j} accepted for {m} -> {n}"))?;
                let fork_proof = fork.prove_consistency(m as u64, n as u64).unwrap();
                check(!verify_consistency(&forked_old, honest_new, &fork_proof), || format!("fork proof at {j} accepted for {m} -> {n}"))?;
                forks += 1;
            }
        }
    }

    let receipt_bytes = ledger.prove_inclusion(17, 40).unwrap().to_json_bytes();
    let key_bytes = pk.to_json_bytes();
    drop(ledger);
    let offline_key = PublicKey::from_json_bytes(&key_bytes).unwrap();
    let offline = Receipt::from_json_bytes(&receipt_bytes).unwrap();
    check(verify_receipt(&offline, &offline_key), || "offline receipt rejected".into())?;
    let other_key = generate_keypair(SignatureAlgorithm::Ed25519).public_key();
    check(!verify_receipt(&offline, &other_key), || "receipt accepted under a foreign key".into())?;

    let elapsed = start.elapsed();
    check(elapsed < LEDGER_BUDGET, || format!("took {elapsed:.1?}, budget {LEDGER_BUDGET:?}"))?;
    Ok(format!("{proofs} proofs for sizes <= {MAX_LEDGER_SIZE} match the oracle, {forks} forks rejected, offline receipt ok, {elapsed:.1?}"))
}

fn pipeline_end_to_end() -> Outcome {
    let mut ws = Workspace::new();
    let server = ws.start_registry();
    let mut rng = ChaCha20Rng::seed_from_u64(0xe2e);
    let train = csv_dataset(&mut rng, 20_000);
    ws.write("data/train.csv", &train);
    ws.write("data/val.csv", &csv_dataset(&mut rng, 4_000));
    ws.write("code/train.py", b"def train(rows):\n    return sum(rows)\n");
    let mut ancestors = Vec::new();
    for (file, id, ty, bind) in [
        ("data/train.csv", "train", "dataset", "minibatch:64"),
        ("data/val.csv", "val", "dataset", "minibatch:64"),
        ("code/train.py", "train.py", "code", "static"),
    ] {
        let mid = ws.sign_object(file, id, ty, &["--bind", bind, "--locator", file]);
        ws.ok(["publish", "--manifest", &format!("{file}.man")]);
        ancestors.push(mid);
    }

    let head_before = RegistryClient::new(ws.registry.as_deref().unwrap()).head().unwrap();
    server.stop().unwrap();
    let server = ws.start_registry();
    let client = RegistryClient::new(&server.url());
    let head_after = client.head().unwrap();
    check(head_after.root_hash == head_before.root_hash && head_after.tree_size == 3, || "registry restart changed the log".into())?;
    for id in &ancestors {
        let rec = client.fetch(&id.parse().unwrap()).unwrap();
        check(rec.is_some(), || format!("{id} lost across restart"))?;
    }

    ws.write("deploy/model.bin", b"\x89weights-v1");
    let mut args = vec!["--bind", "static"];
    for id in &ancestors {
        args.extend(["--origin", id.as_str()]);
    }
    let model = ws.sign_object("deploy/model.bin", "model", "model", &args);
    ws.ok(["publish", "--manifest", "deploy/model.bin.man"]);
    check(client.head().unwrap().tree_size == 4, || "model not appended".into())?;

    let r = ws.run(["verify", "--object", "deploy/model.bin", "--closure"]);
    check(r.code == 0, || format!("clean closure failed:\n{}", r.stdout))?;
    check(r.stdout.matches("  verified ").count() == 4, || format!("expected four verified nodes:\n{}", r.stdout))?;

    let mut poisoned = train.clone();
    let off = rng.gen_range(0..poisoned.len());
    poisoned[off] ^= 0x04;
    ws.write("data/train.csv", &poisoned);
    let r = ws.run(["verify", "--object", "deploy/model.bin", "--closure"]);
    let failed_lines: Vec<&str> = r.stdout.lines().filter(|l| l.trim_start().starts_with("FAILED ")).collect();
    check(r.code == 1, || format!("poisoned closure exit {}", r.code))?;
    check(failed_lines.len() == 1 && failed_lines[0].contains(&ancestors[0]), || format!("expected only {} named:\n{}", ancestors[0], r.stdout))?;
    check(!failed_lines[0].contains(&model), || "model itself flagged".into())?;
    Ok(format!("clean closure exit 0 across a registry restart; poisoned ancestor {} named, exit 1", &ancestors[0][..20]))
}

fn golden(name: &str) -> Vec<u8> {
    fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/testdata").join(name)).unwrap()
}

fn container_bit_exactness() -> Outcome {
    let ws = Workspace::new();
    ws.write("golden/signer.cert", &golden("signer.cert"));
    ws.ok(["trust", "add", "golden/signer.cert"]);
    let payload = golden("training.csv");
    ws.write("data/training.csv", &payload);
    ws.write("golden.man", &golden("envelope.json"));
    ws.write("golden.cbor.man", &golden("envelope.cbor"));

    for (kind, env, file) in [
        ("text", "golden.man", "training.text.vamp"),
        ("binary", "golden.man", "training.binary.vamp"),
        ("binary", "golden.cbor.man", "training.cbor.binary.vamp"),
    ] {
        let out = format!("out/{file}");
        ws.ok(["embed", "--object", "data/training.csv", "--manifest", env, "--kind", kind, "--out", &out]);
        check(ws.read(&out) == golden(file), || format!("{file} differs from committed bytes"))?;
        let h = extract(&golden(file)).map_err(|e| e.to_string())?;
        check(h.payload(&golden(file)) == payload.as_slice(), || format!("{file} payload changed"))?;
        let v = ws.run(["--output", "json", "verify", "--object", &out]);
        check(v.code == 0, || format!("{file} does not verify: {}", v.stdout))?;
        let rt = embed_manifest(h.payload(&golden(file)), h.envelope().unwrap(), if kind == "text" { ContainerKind::Text } else { ContainerKind::Binary })
            .map_err(|e| e.to_string())?;
        check(rt == golden(file), || format!("{file} does not survive extract then embed"))?;
    }
    let id = String::from_utf8(golden("manifest.id")).unwrap();
    ws.ok(["stub", "--object", "data/training.csv", "--locator", id.trim_end(), "--kind", "text", "--out", "out/stub.text.vamp"]);
    check(ws.read("out/stub.text.vamp") == golden("training.stub.text.vamp"), || "text stub differs".into())?;
    ws.ok(["stub", "--object", "data/training.csv", "--locator", id.trim_end(), "--kind", "binary", "--out", "out/stub.binary.vamp"]);
    check(ws.read("out/stub.binary.vamp") == golden("training.stub.binary.vamp"), || "binary stub differs".into())?;

    check(detached_manifest_path(Path::new("data/training.csv")) == PathBuf::from("data/training.csv.man"), || "sidecar path".into())?;
    ws.ok(["create", "--object", "data/training.csv", "--object-id", "training", "--type", "dataset"]);
    ws.ok(["sign", "--manifest", "data/training.csv.manifest.json", "--key", "keys/leaf.key", "--cert", "keys/leaf.cert", "--cert", "keys/root.cert"]);
    check(ws.path("data/training.csv.man").is_file(), || "sign did not write data/training.csv.man".into())?;
    let v = ws.run(["--output", "json", "verify", "--object", "data/training.csv"]);
    check(v.code == 0 && v.json()["source"] == "detached-local", || format!("sidecar not picked up: {}", v.stdout))?;
    let parsed = SignedManifest::from_bytes(&ws.read("data/training.csv.man")).map_err(|e| e.to_string())?;
    check(parsed.manifest_id().is_ok(), || "sidecar envelope unreadable".into())?;
    Ok("5 golden containers match byte for byte, round trips exact, data/training.csv -> data/training.csv.man".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 tamper evidence", tamper_evidence),
        ("2 software and model poisoning", software_and_model_poisoning),
        ("3 canonicalization", canonicalization),
        ("4 multi-minibatch verification", multi_minibatch),
        ("5 ledger soundness", ledger_soundness),
        ("6 pipeline end to end", pipeline_end_to_end),
        ("7 container bit-exactness", container_bit_exactness),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
