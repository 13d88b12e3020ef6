//! Acceptance criteria at full size. Runs without the libtest harness so
//! the per-criterion lines are always printed and the runtime budgets are
//! measured without other tests competing for cores.

use std::time::{Duration, Instant};
use stoplab::harness::{report_csv, report_json, Experiment, Lab, LabConfig, Report, Verdict};

struct Outcome {
    lines: Vec<String>,
    failed: Vec<usize>,
}

impl Outcome {
    fn record(&mut self, k: usize, pass: bool, what: &str) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let line = format!("criterion {k:>2} [{tag}] {what}");
        println!("{line}");
        self.lines.push(line);
        if !pass {
            self.failed.push(k);
        }
    }
}

fn timed(lab: &Lab, id: &str) -> (Experiment, Duration) {
    let t = Instant::now();
    let e = lab.run(id).unwrap_or_else(|err| panic!("{id}: {err}"));
    (e, t.elapsed())
}

fn summary(e: &Experiment) -> String {
    e.checks
        .iter()
        .map(|c| format!("{}={:.3e}", c.name, c.value))
        .collect::<Vec<_>>()
        .join(" ")
}

fn passed(e: &Experiment) -> bool {
    e.verdict == Verdict::Pass
}

fn main() {
    let config = LabConfig::default();
    let lab = Lab::new(config.clone()).unwrap();
    let mut out = Outcome {
        lines: Vec::new(),
        failed: Vec::new(),
    };

    let (e1, t1) = timed(&lab, "E1");
    out.record(
        1,
        passed(&e1) && t1 < Duration::from_secs(30),
        &format!(
            "tree exactness N=2..=12 in {:.1} s: {}",
            t1.as_secs_f64(),
            summary(&e1)
        ),
    );

    let (e2, _) = timed(&lab, "E2");
    out.record(
        2,
        passed(&e2),
        &format!("Kunita-Watanabe: {}", summary(&e2)),
    );

    let (e3, _) = timed(&lab, "E3");
    out.record(
        3,
        e3.verdict != Verdict::Fail,
        &format!(
            "enlargement ({}), convention {}: {}",
            e3.verdict.as_str(),
            e3.parameters["winning_convention"],
            summary(&e3)
        ),
    );

    let (e4, t4) = timed(&lab, "E4");
    out.record(
        4,
        passed(&e4) && t4 < Duration::from_secs(300),
        &format!(
            "exponential laws in {:.1} s: {}",
            t4.as_secs_f64(),
            summary(&e4)
        ),
    );

    let (e5, _) = timed(&lab, "E5");
    out.record(5, passed(&e5), &format!("Laguerre gaps: {}", summary(&e5)));

    let (e6, _) = timed(&lab, "E6");
    out.record(
        6,
        passed(&e6),
        &format!("odd/even projections: {}", summary(&e6)),
    );

    let (e8, _) = timed(&lab, "E8");
    out.record(7, passed(&e8), &format!("corporgam: {}", summary(&e8)));

    let (e10, _) = timed(&lab, "E10");
    out.record(8, passed(&e10), &format!("phi family: {}", summary(&e10)));

    let (e11, _) = timed(&lab, "E11");
    out.record(
        9,
        passed(&e11),
        &format!("Imhof and independence: {}", summary(&e11)),
    );

    let (e7, _) = timed(&lab, "E7");
    out.record(
        10,
        e7.verdict == Verdict::Observed,
        &format!("M^(f,perp) ({}): {}", e7.verdict.as_str(), summary(&e7)),
    );

    // every experiment, twice, from fresh labs
    let small = LabConfig {
        n: 20_000,
        dt: 1e-3,
        tree_steps: 8,
        ..config
    };
    let render = || {
        let lab = Lab::new(small.clone()).unwrap();
        let r = Report::new(&small, lab.run_all().unwrap());
        (report_json(&r), report_csv(&r))
    };
    let (a, b) = (render(), render());
    out.record(
        11,
        a == b,
        &format!(
            "determinism: all 14 experiments rerun, {} JSON bytes identical",
            a.0.len()
        ),
    );

    assert!(
        out.failed.is_empty(),
        "failed criteria {:?}\n{}",
        out.failed,
        out.lines.join("\n")
    );
}
