mod common;

use std::process::Command;
use std::time::Duration;

use common::*;
use serde_json::Value;

fn gateway_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gateway"))
}

#[test]
fn default_config_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = gateway_bin().arg("default-config").output().unwrap();
    assert!(out.status.success());
    let path = dir.path().join("gateway.toml");
    std::fs::write(&path, &out.stdout).unwrap();
    let snap = format!("snapshot.dir={}", dir.path().join("s").display());
    let eps = format!("episodes.dir={}", dir.path().join("e").display());
    let out = gateway_bin()
        .args([
            "validate-config",
            path.to_str().unwrap(),
            "--override",
            &snap,
            "--override",
            &eps,
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_is_refused_with_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gateway.toml");
    std::fs::write(&path, "[pipeline.filter]\ndelta9 = 1\n").unwrap();
    let out = gateway_bin()
        .args(["validate-config", path.to_str().unwrap()])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta9"));

    std::fs::write(&path, "[pipeline.filter]\ndelta1 = -1\n").unwrap();
    let out = gateway_bin()
        .args(["validate-config", path.to_str().unwrap()])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn simulator_binary_feeds_a_gateway() {
    let (gw, dir) = start().await;
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "[trajectory]\nkind = \"waypoint-linear\"\namplitude = 0.05\n\n[noise]\ntremor_amplitude = 0.0\n",
    )
    .unwrap();
    let out = tokio::process::Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args([
            "--mode",
            "both",
            "--rate",
            "120",
            "--duration",
            "0.5",
            "--seed",
            "4",
            "--hands",
            "both",
        ])
        .arg("--trajectory")
        .arg(&spec)
        .args(["--target", &gw.addrs().udp.to_string()])
        .args(["--handle-target", &gw.addrs().handle.to_string()])
        .output()
        .await
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports[0][0], "gesture");
    assert_eq!(reports[0][1]["sent"], 60);
    assert_eq!(reports[0][1]["datagrams"], 120);
    assert_eq!(reports[1][1]["sent"], 60);
    wait_for(&gw, Duration::from_secs(10), |s| {
        s.streams.len() == 4 && s.streams.values().all(|st| st.processed == 60)
    })
    .await;
    gw.shutdown().await;
}
