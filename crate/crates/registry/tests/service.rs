use std::fs;
use std::path::Path;

use vamp_core::binding::bind_static;
use vamp_core::codec::Format;
use vamp_core::container::ManifestRegistry;
use vamp_core::crypto::{
    generate_keypair, issue_certificate, sign_manifest, Certificate, HashAlgorithm, Issuer,
    PrivateKey, SignatureAlgorithm, SignedManifest, Validity,
};
use vamp_core::ledger::{verify_consistency, verify_receipt, EntryMode};
use vamp_core::manifest::{Manifest, ObjectType};
use vamp_core::timestamp::now;
use vamp_registry::{BackgroundServer, RegistryClient, ServerConfig};

struct Publisher {
    key: PrivateKey,
    chain: Vec<Certificate>,
}

fn publisher(trust_dir: Option<&Path>) -> Publisher {
    let t = now();
    let root_key = generate_keypair(SignatureAlgorithm::Ed25519);
    let root = issue_certificate(
        "Root",
        &root_key.public_key(),
        Validity::days_from(t, 30),
        Issuer::SelfSigned(&root_key),
        t,
    )
    .unwrap();
    let key = generate_keypair(SignatureAlgorithm::Ed25519);
    let leaf = issue_certificate(
        "Publisher",
        &key.public_key(),
        Validity::days_from(t, 10),
        Issuer::Certificate {
            key: &root_key,
            cert: &root,
        },
        t,
    )
    .unwrap();
    if let Some(dir) = trust_dir {
        fs::create_dir_all(dir).unwrap();
        fs::write(dir.join("root.cert"), root.to_json_bytes()).unwrap();
    }
    Publisher {
        key,
        chain: vec![leaf, root],
    }
}

fn envelope(p: &Publisher, object_id: &str, payload: &[u8], format: Format) -> SignedManifest {
    let m = Manifest::new(
        object_id,
        ObjectType::Dataset,
        "CSV",
        "2024-01-01T00:00:00Z",
        vec![bind_static(payload, HashAlgorithm::Sha256).unwrap()],
    );
    sign_manifest(&m, format, &p.key, &p.chain).unwrap()
}

fn config(root: &Path) -> ServerConfig {
    ServerConfig {
        addr: "127.0.0.1:0".into(),
        data_dir: root.join("data"),
        trust_dir: root.join("trust"),
        log_key: None,
        entry_mode: EntryMode::DigestOnly,
    }
}

#[test]
fn publish_fetch_and_idempotence() {
    let dir = tempfile::tempdir().unwrap();
    let p = publisher(Some(&dir.path().join("trust")));
    let server = BackgroundServer::start(&config(dir.path())).unwrap();
    let client = RegistryClient::new(&server.url());
    let log_key = client.log_key().unwrap();

    let env = envelope(&p, "imagenet-sub", b"a,b\n", Format::Json);
    let first = client.publish(&env.to_bytes()).unwrap();
    assert!(first.created);
    assert!(verify_receipt(&first.record.receipt, &log_key));
    assert_eq!(first.record.manifest_id, env.manifest_id().unwrap());

    let again = client.publish(&env.to_bytes()).unwrap();
    assert!(!again.created);
    assert_eq!(again.record.sequence, first.record.sequence);
    assert_eq!(client.head().unwrap().tree_size, 1);

    let fetched = client.fetch(&first.record.manifest_id).unwrap().unwrap();
    assert_eq!(fetched.envelope, env.to_bytes());
    assert_eq!(
        SignedManifest::from_bytes(&fetched.envelope).unwrap().manifest_id().unwrap(),
        first.record.manifest_id
    );
    let unknown = vamp_core::manifest::ManifestId::from_digest_bytes(&[1; 32]);
    assert!(client.fetch(&unknown).unwrap().is_none());
}

#[test]
fn rejects_untrusted_and_malformed() {
    let dir = tempfile::tempdir().unwrap();
    publisher(Some(&dir.path().join("trust")));
    let stranger = publisher(None);
    let server = BackgroundServer::start(&config(dir.path())).unwrap();
    let client = RegistryClient::new(&server.url());

    let env = envelope(&stranger, "x", b"x", Format::Json);
    let err = client.publish(&env.to_bytes()).err().unwrap();
    assert_eq!(err.status(), Some(401));
    let err = client.publish(b"not an envelope").err().unwrap();
    assert_eq!(err.status(), Some(400));
    assert_eq!(client.head().unwrap().tree_size, 0);
}

#[test]
fn object_listing_and_log_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let p = publisher(Some(&dir.path().join("trust")));
    let server = BackgroundServer::start(&config(dir.path())).unwrap();
    let client = RegistryClient::new(&server.url());

    let v1 = envelope(&p, "imagenet-sub", b"v1\n", Format::Json);
    let other = envelope(&p, "other object/with spaces", b"o\n", Format::Cbor);
    let v2 = envelope(&p, "imagenet-sub", b"v2\n", Format::Cbor);
    for e in [&v1, &other, &v2] {
        client.publish(&e.to_bytes()).unwrap();
    }
    let listed = client.by_object("imagenet-sub").unwrap();
    assert_eq!(listed.len(), 2);
    assert_eq!(listed[0].envelope, v1.to_bytes());
    assert_eq!(listed[1].envelope, v2.to_bytes());
    assert!(listed[0].sequence < listed[1].sequence);
    assert_eq!(client.by_object("other object/with spaces").unwrap().len(), 1);
    assert!(client.by_object("nothing").unwrap().is_empty());

    let digest = HashAlgorithm::Sha256.digest(b"v2\n");
    assert_eq!(client.find_by_content(&digest).unwrap(), vec![v2.to_bytes()]);

    assert_eq!(client.head().unwrap().tree_size, 3);
    assert_eq!(client.proof(0, 2).unwrap().audit_path.len(), 1);
    assert_eq!(client.proof(5, 3).err().unwrap().status(), Some(416));

    let key = client.log_key().unwrap();
    let old = client.proof(0, 2).unwrap().signed_tree_head;
    let new = client.head().unwrap();
    let proof = client.consistency(2, 3).unwrap();
    assert!(old.verify(&key) && new.verify(&key));
    assert!(verify_consistency(&old, &new, &proof));
}

#[test]
fn locator_fetch() {
    let dir = tempfile::tempdir().unwrap();
    let p = publisher(Some(&dir.path().join("trust")));
    let server = BackgroundServer::start(&config(dir.path())).unwrap();
    let client = RegistryClient::new(&server.url());
    let env = envelope(&p, "d", b"d", Format::Json);
    let id = client.publish(&env.to_bytes()).unwrap().record.manifest_id;
    let url = client.manifest_url(&id);
    assert_eq!(client.fetch_locator(&url).unwrap(), Some(env.to_bytes()));
    assert_eq!(client.fetch_locator(id.as_str()).unwrap(), Some(env.to_bytes()));
    assert!(client.fetch_locator("ftp://nowhere").is_err());
}

#[test]
fn restart_preserves_records_and_head() {
    let dir = tempfile::tempdir().unwrap();
    let p = publisher(Some(&dir.path().join("trust")));
    let cfg = config(dir.path());
    let envs: Vec<_> = (0..4)
        .map(|i| envelope(&p, &format!("obj{i}"), format!("row {i}\n").as_bytes(), Format::Json))
        .collect();

    let server = BackgroundServer::start(&cfg).unwrap();
    let client = RegistryClient::new(&server.url());
    let key = client.log_key().unwrap();
    let receipts: Vec<_> = envs
        .iter()
        .map(|e| client.publish(&e.to_bytes()).unwrap().record)
        .collect();
    let head_before = client.head().unwrap();
    server.stop().unwrap();

    let server = BackgroundServer::start(&cfg).unwrap();
    let client = RegistryClient::new(&server.url());
    assert_eq!(client.log_key().unwrap(), key);
    let head_after = client.head().unwrap();
    assert_eq!(head_after.tree_size, head_before.tree_size);
    assert_eq!(head_after.root_hash, head_before.root_hash);
    for (e, r) in envs.iter().zip(&receipts) {
        let got = client.fetch(&r.manifest_id).unwrap().unwrap();
        assert_eq!(got.envelope, e.to_bytes());
        assert_eq!(got.sequence, r.sequence);
        assert!(verify_receipt(&got.receipt, &key));
    }
    let more = envelope(&p, "late", b"late\n", Format::Json);
    assert_eq!(client.publish(&more.to_bytes()).unwrap().record.sequence, 4);
}

#[test]
fn interrupted_publish_is_completed_on_open() {
    let dir = tempfile::tempdir().unwrap();
    let p = publisher(Some(&dir.path().join("trust")));
    let cfg = config(dir.path());
    let env = envelope(&p, "half", b"half\n", Format::Json);
    let id = {
        let server = BackgroundServer::start(&cfg).unwrap();
        let client = RegistryClient::new(&server.url());
        client.publish(&env.to_bytes()).unwrap().record.manifest_id
    };
    let meta = cfg.data_dir.join("manifests").join(format!("{id}.json"));
    fs::remove_file(&meta).unwrap();
    let orphan = envelope(&p, "orphan", b"orphan\n", Format::Json);
    let orphan_id = orphan.manifest_id().unwrap();
    fs::write(
        cfg.data_dir.join("manifests").join(format!("{orphan_id}.env")),
        orphan.to_bytes(),
    )
    .unwrap();

    let server = BackgroundServer::start(&cfg).unwrap();
    let client = RegistryClient::new(&server.url());
    let key = client.log_key().unwrap();
    let r = client.fetch(&id).unwrap().unwrap();
    assert_eq!(r.sequence, 0);
    assert!(verify_receipt(&r.receipt, &key));
    let o = client.fetch(&orphan_id).unwrap().unwrap();
    assert_eq!(o.sequence, 1);
    assert!(verify_receipt(&o.receipt, &key));
    assert_eq!(client.head().unwrap().tree_size, 2);
}
