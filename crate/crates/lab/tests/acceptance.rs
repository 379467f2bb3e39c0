use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use carlab::checks::{self, CheckOutcome, Scale};
use carlab::LabError;

const SEED: u64 = 17;

fn report(id: usize, budget: Duration, f: impl FnOnce() -> Result<CheckOutcome, LabError>) -> bool {
    let t = Instant::now();
    let out = match f() {
        Ok(o) => o,
        Err(e) => {
            println!("FAIL criterion {id:2}: error {e}");
            return false;
        }
    };
    let took = t.elapsed();
    let metrics: Vec<String> = out.metrics.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
    let within = took <= budget;
    let pass = out.pass && within;
    println!(
        "{} criterion {id:2} {}: {} [{:.1}s of {}s]{}",
        if pass { "PASS" } else { "FAIL" },
        out.name,
        metrics.join(" "),
        took.as_secs_f64(),
        budget.as_secs(),
        if out.note.is_empty() { String::new() } else { format!(" ({})", out.note) }
    );
    pass
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn criterion_01_operator_correctness() -> bool {
    report(1, secs(5), || checks::laplacian_oracle(Scale::Full))
}

fn criterion_02_skew_adjointness() -> bool {
    report(2, secs(1), || checks::skew_adjointness(Scale::Full))
}

fn criterion_03_conservation() -> bool {
    report(3, secs(10), || checks::conservation(Scale::Full))
}

fn criterion_04_duhamel() -> bool {
    report(4, secs(30), || checks::duhamel(Scale::Full))
}

fn criterion_05_identity_suite() -> bool {
    report(5, secs(120), || checks::identities(Scale::Full, SEED))
}

fn criterion_06_conjugation() -> bool {
    report(6, secs(60), || checks::conjugation(Scale::Full, SEED))
}

fn criterion_07_carleman_plateau() -> bool {
    report(7, secs(600), || checks::carleman_plateau(Scale::Full, SEED))
}

fn criterion_08_convexity() -> bool {
    report(8, secs(1), || checks::convexity(Scale::Full))
}

fn criterion_09_stability() -> bool {
    report(9, secs(300), || checks::stability(Scale::Full, SEED))
}

fn criterion_10_adjoint_gradient() -> bool {
    report(10, secs(120), || checks::adjoint_gradient(Scale::Full, SEED))
}

fn criterion_11_reconstruction() -> bool {
    report(11, secs(900), || checks::reconstruction(Scale::Full, SEED))
}

fn numeric_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn check_run(out: &Path) -> std::path::PathBuf {
    let o = Command::new(env!("CARGO_BIN_EXE_carlab"))
        .args(["check", "--seed", "7", "--out"])
        .arg(out)
        .output()
        .expect("spawn carlab");
    assert!(o.status.code().is_some_and(|c| c <= 1), "check crashed: {}", String::from_utf8_lossy(&o.stderr));
    std::path::PathBuf::from(String::from_utf8(o.stdout).unwrap().trim())
}

fn criterion_12_determinism() -> bool {
    let t = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = numeric_csvs(&check_run(a.path()));
    let rb = numeric_csvs(&check_run(b.path()));
    let same = !ra.is_empty() && ra == rb;
    println!(
        "{} criterion 12 determinism: files={} identical={same} [{:.1}s]",
        if same { "PASS" } else { "FAIL" },
        ra.len(),
        t.elapsed().as_secs_f64()
    );
    same
}

fn main() {
    let all: [(&str, fn() -> bool); 12] = [
        ("01", criterion_01_operator_correctness),
        ("02", criterion_02_skew_adjointness),
        ("03", criterion_03_conservation),
        ("04", criterion_04_duhamel),
        ("05", criterion_05_identity_suite),
        ("06", criterion_06_conjugation),
        ("07", criterion_07_carleman_plateau),
        ("08", criterion_08_convexity),
        ("09", criterion_09_stability),
        ("10", criterion_10_adjoint_gradient),
        ("11", criterion_11_reconstruction),
        ("12", criterion_12_determinism),
    ];
    // Positional arguments select criteria by number, e.g. `-- 05 11`.
    let picked: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, f) in all {
        if picked.is_empty() || picked.iter().any(|p| p == id) {
            if !f() {
                failed += 1;
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
