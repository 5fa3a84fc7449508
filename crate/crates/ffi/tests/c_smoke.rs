//! Compiles and runs a small C program against the generated header and the
//! static library, proving the ABI end to end.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "gradiometer.h"

int main(void) {
    if (strlen(gradiometer_version()) == 0) return 1;

    GradiometerPhysics *physics = gradiometer_physics_new();
    if (!physics) return 2;

    double phase = 0.0;
    if (gradiometer_physics_gravimeter_phase(physics, 9.806, &phase) !=
        GRADIOMETER_STATUS_OK) return 3;
    if (fabs(phase - 1.61e7 * 9.806 * 0.0256) > 1.0) return 4;

    if (gradiometer_physics_set(physics, "dz", 0.35) != GRADIOMETER_STATUS_OK)
        return 5;
    if (gradiometer_physics_coriolis_shift(physics, 0.5, &phase) !=
        GRADIOMETER_STATUS_FIT_FAILED) return 6;
    if (strlen(gradiometer_last_error_message()) == 0) return 7;

    double qpn = 0.0;
    if (gradiometer_qpn_rms(0.225, 0.5, 200000, &qpn) != GRADIOMETER_STATUS_OK)
        return 8;
    if (fabs(qpn - 0.00106) > 0.00005) return 9;

    enum { N = 128 };
    double xs[N], ys[N];
    for (int i = 0; i < N; i++) {
        double t = 6.28318530718 * i / N;
        xs[i] = 0.225 * sin(t) + 0.5;
        ys[i] = 0.225 * sin(t + 1.3) + 0.5;
    }
    GradiometerEllipseFit fit;
    if (gradiometer_fit_ellipse(xs, ys, N, 1, 0, 0, &fit) !=
        GRADIOMETER_STATUS_OK) return 10;
    if (fabs(fit.phi - 1.3) > 1e-6) return 11;
    if (fit.converged != 1) return 12;

    gradiometer_physics_free(physics);
    puts("c smoke ok");
    return 0;
}
"#;

#[test]
fn c_header_compiles_links_and_runs() {
    let manifest_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include_dir = manifest_dir.join("include");
    assert!(
        include_dir.join("gradiometer.h").exists(),
        "header not generated"
    );

    // target/<profile>/ from the test binary's own location.
    let mut lib_dir = std::env::current_exe().unwrap();
    lib_dir.pop(); // test binary name
    if lib_dir.ends_with("deps") {
        lib_dir.pop();
    }
    let static_lib = lib_dir.join("libgradiometer_ffi.a");
    assert!(static_lib.exists(), "missing {}", static_lib.display());

    let work = tempfile_dir();
    let c_path = work.join("smoke.c");
    let bin_path = work.join("smoke");
    std::fs::write(&c_path, C_PROGRAM).unwrap();

    let compile = Command::new("cc")
        .arg(&c_path)
        .arg("-I")
        .arg(&include_dir)
        .arg(&static_lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin_path)
        .output()
        .expect("cc available");
    assert!(
        compile.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&bin_path).output().unwrap();
    assert!(
        run.status.success(),
        "smoke exited {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("c smoke ok"));
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gradiometer_c_smoke_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
