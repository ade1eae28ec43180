//! Compiles and runs a small C program against the generated header and the
//! static library, proving the ABI is consumable from C as shipped.

use std::path::PathBuf;
use std::process::Command;

fn target_dir() -> PathBuf {
    // integration tests run from the crate root; the workspace target dir is
    // two levels up unless CARGO_TARGET_DIR overrides it
    std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("..")
                .join("..")
                .join("target")
        })
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "qedlab.h"

static const char *CONFIG =
    "[limits]\n"
    "lambda = [1.0]\n"
    "mu = [1.0]\n"
    "theta = [0.5]\n"
    "lambda_hat = [0.0]\n"
    "mu_hat = [1.0]\n"
    "c2u = [1.0]\n"
    "gamma = 1.0\n"
    "[cost]\n"
    "kind = \"linear_queue\"\n"
    "coeffs = [1.0]\n"
    "[grid]\n"
    "box_halfwidth = 4.0\n"
    "points_per_axis = 41\n"
    "[experiment]\n"
    "x0 = [0.5]\n"
    "sweep_n = [10]\n"
    "policies = [\"cmu\"]\n"
    "reps = 4\n"
    "base_seed = 3\n";

int main(void) {
    QedModel *model = NULL;
    if (qed_model_new(CONFIG, &model) != QED_OK) {
        fprintf(stderr, "new failed: %s\n", qed_last_error_message());
        return 1;
    }
    if (qed_model_class_count(model) != 1) {
        return 2;
    }
    if (qed_model_solve(model) != QED_OK) {
        fprintf(stderr, "solve failed: %s\n", qed_last_error_message());
        return 3;
    }
    double x = 0.0, v = -1.0;
    if (qed_model_value_at(model, &x, 1, &v) != QED_OK || v <= 0.0) {
        return 4;
    }
    QedSimSummary summary;
    memset(&summary, 0, sizeof summary);
    if (qed_model_simulate(model, 10, "cmu", 4, 1, &summary) != QED_OK) {
        fprintf(stderr, "simulate failed: %s\n", qed_last_error_message());
        return 5;
    }
    if (summary.event_count == 0 || summary.wc_violations != 0) {
        return 6;
    }
    printf("V(0) = %.6f, mean cost = %.6f over %llu events\n", v,
           summary.mean_cost, (unsigned long long)summary.event_count);
    qed_model_free(model);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let target = target_dir();
    // debug vs release: pick whichever holds the freshly built staticlib
    let lib = ["debug", "release"]
        .iter()
        .map(|p| target.join(p).join("libqedlab_capi.a"))
        .find(|p| p.exists())
        .expect("libqedlab_capi.a built alongside the tests");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("smoke");

    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let compile = Command::new(&cc)
        .arg(&src)
        .arg(&lib)
        .arg(format!("-I{}", include.display()))
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("C compiler available");
    assert!(
        compile.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "smoke binary exited {:?}: {}{}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("V(0) ="), "stdout: {stdout}");
}
