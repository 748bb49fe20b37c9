#![allow(dead_code)]

use std::ffi::OsStr;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use vamp_core::ledger::EntryMode;
use vamp_registry::{BackgroundServer, ServerConfig};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.stdout)
            .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }

    pub fn first_word(&self) -> String {
        self.stdout.split_whitespace().next().unwrap_or_default().to_owned()
    }
}

impl From<Output> for Run {
    fn from(o: Output) -> Self {
        Run {
            code: o.status.code().unwrap_or(-1),
            stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        }
    }
}

/// A scratch directory with a root CA in `trust/` and a leaf signer.
pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub registry: Option<String>,
}

impl Workspace {
    pub fn new() -> Self {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
            registry: None,
        };
        ws.ok(["keygen", "--subject", "Root", "--self-signed", "--out", "keys/root"]);
        ws.ok(["trust", "add", "keys/root.cert"]);
        ws.ok([
            "keygen",
            "--subject",
            "Pipeline",
            "--issuer-key",
            "keys/root.key",
            "--issuer-cert",
            "keys/root.cert",
            "--out",
            "keys/leaf",
        ]);
        ws
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) {
        let p = self.path(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, bytes).unwrap();
    }

    pub fn read(&self, rel: &str) -> Vec<u8> {
        fs::read(self.path(rel)).unwrap()
    }

    pub fn run<I, S>(&self, args: I) -> Run
    where
        I: IntoIterator<Item = S>,
        S: AsRef<OsStr>,
    {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_vamp"));
        cmd.current_dir(self.dir.path())
            .env_remove("VAMP_REGISTRY_URL")
            .env_remove("VAMP_GRAPH_DIR")
            .env("VAMP_TRUST_DIR", self.path("trust"));
        if let Some(url) = &self.registry {
            cmd.env("VAMP_REGISTRY_URL", url);
        }
        cmd.args(args).output().unwrap().into()
    }

    /// Runs and asserts exit 0.
    pub fn ok<I, S>(&self, args: I) -> Run
    where
        I: IntoIterator<Item = S>,
        S: AsRef<OsStr>,
    {
        let args: Vec<_> = args.into_iter().map(|a| a.as_ref().to_owned()).collect();
        let r = self.run(&args);
        assert_eq!(r.code, 0, "vamp {args:?} failed\nstdout:\n{}\nstderr:\n{}", r.stdout, r.stderr);
        r
    }

    /// `create` then `sign` with the leaf key. Returns the manifest id.
    pub fn sign_object(&self, object: &str, object_id: &str, object_type: &str, extra: &[&str]) -> String {
        let mut args = vec![
            "create", "--object", object, "--object-id", object_id, "--type", object_type,
            "--created-at", "2024-05-01T12:00:00Z",
        ];
        args.extend_from_slice(extra);
        self.ok(&args);
        let manifest = format!("{object}.manifest.json");
        self.ok([
            "sign", "--manifest", &manifest, "--key", "keys/leaf.key", "--cert", "keys/leaf.cert",
            "--cert", "keys/root.cert",
        ])
        .first_word()
    }

    pub fn start_registry(&mut self) -> BackgroundServer {
        let server = BackgroundServer::start(&self.registry_config()).unwrap();
        self.registry = Some(server.url());
        server
    }

    pub fn registry_config(&self) -> ServerConfig {
        ServerConfig {
            addr: "127.0.0.1:0".into(),
            data_dir: self.path("registry"),
            trust_dir: self.path("trust"),
            log_key: None,
            entry_mode: EntryMode::DigestOnly,
        }
    }
}

