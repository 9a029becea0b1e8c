//! Builds a small C program against the generated header and the static
//! library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "fcopula.h"

int main(void) {
    FcParams *p = NULL;
    if (fc_params_new_exponential(1.0, 1.0, &p) != FC_STATUS_OK) return 1;
    double chi = 0.0;
    if (fc_chi_limit(p, 0.0, &chi) != FC_STATUS_OK) return 2;
    if (fabs(chi - 1.0) > 1e-12) return 3;
    if (fc_chi_limit(NULL, 1.0, &chi) != FC_STATUS_NULL_POINTER) return 4;
    if (fc_last_error() == NULL) return 5;
    fc_params_free(p);
    FcParams *bad = NULL;
    if (fc_params_new_matern(1.0, 1.0, -2.0, &bad) == FC_STATUS_OK) return 6;
    printf("ok\n");
    return 0;
}
"#;

/// The static library sits next to the test executable in target/<profile>/deps
/// under `cargo test`, and one level up after `cargo build`.
fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    [deps, deps.parent().unwrap()]
        .iter()
        .map(|d| d.join("libfcopula_ffi.a"))
        .find(|p| p.exists())
}

fn cc() -> String {
    std::env::var("CC").unwrap_or_else(|_| "cc".into())
}

#[test]
fn c_program_links_and_runs() {
    let lib = static_lib().expect("libfcopula_ffi.a not built");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(cc())
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "compiling the smoke program failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "smoke program exited with {:?}",
        out.status.code()
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
