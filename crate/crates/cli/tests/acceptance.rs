//! End-to-end acceptance checks against the built `gigaudit` binary and the
//! library. Runs without the libtest harness so every check prints exactly
//! one PASS/FAIL line; the process fails if any check fails.
//!
//! Pass a substring as the first argument to run only matching checks.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use gigaudit::audit::{run_audit, AuditConfig, AuditRun};
use gigaudit::linkage::{LinkConfig, LinkedTrip};
use gigaudit::metrics::{
    adjust_inflation, interpolate_gaps, per_minute_fare_by_split, surplus_series, take_rate_histogram, take_rate_stats,
    CohortGroup, GroupBy, PointStatus, ShareBins,
};
use gigaudit::model::{
    ActivitySegment, Calendar, DriverId, Era, EraBoundaries, Money, PaymentCategory, PaymentEvent, RpiSeries,
    SegmentState, Timestamp, TripRecord, TripStatus, YearMonth,
};
use gigaudit::numeric::Matrix;
use gigaudit::predict::{fit_ols, r2};
use gigaudit::synthgen::{GroundTruth, GROUND_TRUTH_FILE};
use gigaudit::worktime::state_totals_ms;
use hmac::{Hmac, Mac};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Check = fn(&Path) -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gigaudit")
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args).env_remove("GIGAUDIT_SALT").env("RUST_LOG", "error");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_ok(args: &[&str], envs: &[(&str, &str)]) -> Result<(), String> {
    let out = run(args, envs);
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`gigaudit {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Writes `config` and generates bundles under `dir/bundles`.
fn synth(dir: &Path, config: &str) -> Result<(PathBuf, GroundTruth), String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).map_err(|e| e.to_string())?;
    let root = dir.join("bundles");
    run_ok(&["synth", "--config", p(&cfg), "--out", p(&root)], &[])?;
    let text = std::fs::read_to_string(root.join(GROUND_TRUTH_FILE)).map_err(|e| e.to_string())?;
    let truth: GroundTruth = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok((root, truth))
}

fn audit_lib(root: &Path, eras: EraBoundaries) -> Result<AuditRun, String> {
    let cfg = AuditConfig {
        link: LinkConfig {
            eras,
            ..LinkConfig::default()
        },
        ..AuditConfig::default()
    };
    run_audit(root, &cfg).map_err(|e| e.to_string())
}

fn all_dynamic() -> EraBoundaries {
    EraBoundaries::new(YearMonth::new(2000, 1), YearMonth::new(2000, 2)).unwrap()
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

/// Relative path → SHA-256 of every file under `dir`.
fn tree_digest(dir: &Path) -> BTreeMap<String, String> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(&bytes)));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn all_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    tree_digest(dir)
        .into_keys()
        .map(|rel| {
            let bytes = std::fs::read(dir.join(&rel)).unwrap();
            (rel, bytes)
        })
        .collect()
}

fn contains(haystack: &[u8], needle: &[u8]) -> usize {
    haystack.windows(needle.len()).filter(|w| *w == needle).count()
}

// 1 ------------------------------------------------------------------------

fn fixed_era_round_trip(dir: &Path) -> Result<String, String> {
    let started = Instant::now();
    let (root, truth) = synth(
        dir,
        r#"{"seed": 101, "n_drivers": 50, "start": "2021-01-01", "end": "2022-01-01",
            "commission": 0.25, "payment_jitter_seconds": 60}"#,
    )?;
    run_ok(&["audit", p(&root), "--out", p(&dir.join("report"))], &[])?;
    let elapsed = started.elapsed().as_secs_f64();

    let run = audit_lib(&root, EraBoundaries::default())?;
    let linked: Vec<&LinkedTrip> = run.bundles.iter().flat_map(|b| b.link.linked.iter()).collect();
    ensure!(!linked.is_empty(), "no linked trips");
    let exact = linked.iter().filter(|l| l.driver_share == Some(0.75)).count();
    ensure!(
        exact == linked.len(),
        "driver share 0.75 on {exact} of {} linked trips",
        linked.len()
    );

    let mut truth_pairs = 0usize;
    let mut matched = 0usize;
    for b in &run.bundles {
        let t = truth
            .driver(&b.bundle.driver_id)
            .ok_or("driver missing from ground truth")?;
        let expected: BTreeSet<(i64, i64)> = t.pairings.iter().map(|p| (p.dropoff_ms, p.payment_ms)).collect();
        truth_pairs += expected.len();
        for l in &b.link.linked {
            let paid = l
                .earnings
                .iter()
                .map(|e| e.ts.0)
                .min()
                .ok_or("linked trip without earnings")?;
            if expected.contains(&(l.trip.dropoff_ts.ok_or("no dropoff")?.0, paid)) {
                matched += 1;
            }
        }
    }
    let rate = matched as f64 / truth_pairs as f64;
    ensure!(
        rate >= 0.99,
        "{matched}/{truth_pairs} pairs match ground truth ({:.4})",
        rate
    );
    ensure!(elapsed < 60.0, "synth + audit took {elapsed:.1}s");
    Ok(format!(
        "{} linked trips all at share 0.75; {matched}/{truth_pairs} pairs correct; {elapsed:.1}s",
        linked.len()
    ))
}

// 2 ------------------------------------------------------------------------

fn dynamic_era_round_trip(dir: &Path) -> Result<String, String> {
    let (root, truth) = synth(
        dir,
        r#"{"seed": 202, "n_drivers": 12, "start": "2023-02-01", "end": "2023-06-01",
            "eras": {"opaque_from": "2000-01", "dynamic_from": "2000-02"}}"#,
    )?;
    let run = audit_lib(&root, all_dynamic())?;
    let linked: Vec<LinkedTrip> = run.bundles.iter().flat_map(|b| b.link.linked.iter().cloned()).collect();
    let share = truth
        .dynamic_share
        .as_ref()
        .ok_or("generator recorded no dynamic shares")?;
    let stats = take_rate_stats(&linked, GroupBy::Trip, 0.75).map_err(|e| e.to_string())?;
    ensure!(stats.n >= 10_000, "only {} share-valid trips", stats.n);
    ensure!(
        (stats.mean - share.expected_mean).abs() <= 0.005,
        "mean {:.4} vs generator {:.4}",
        stats.mean,
        share.expected_mean
    );
    ensure!(
        (stats.median - share.expected_median).abs() <= 0.005,
        "median {:.4} vs generator {:.4}",
        stats.median,
        share.expected_median
    );
    let hist = take_rate_histogram(&linked, &ShareBins::default());
    let total = (hist.total() + hist.below + hist.above) as f64;
    let mut worst = 0.0f64;
    for (bin, t) in hist.bins.iter().zip(&share.bins) {
        ensure!(bin.label == t.label, "bin labels differ: {} vs {}", bin.label, t.label);
        let gap = (bin.count as f64 / total - t.expected).abs();
        worst = worst.max(gap);
        ensure!(
            gap <= 0.02,
            "bin {}: {:.4} vs analytic {:.4}",
            bin.label,
            bin.count as f64 / total,
            t.expected
        );
    }
    Ok(format!(
        "{} trips; mean {:.4} (truth {:.4}), median {:.4} (truth {:.4}); worst bin gap {:.2}pp",
        stats.n,
        stats.mean,
        share.expected_mean,
        stats.median,
        share.expected_median,
        worst * 100.0
    ))
}

// 3 ------------------------------------------------------------------------

fn working_time_dominance(dir: &Path) -> Result<String, String> {
    let (root, truth) = synth(
        dir,
        r#"{"seed": 303, "n_drivers": 10, "start": "2022-06-01", "end": "2023-06-01"}"#,
    )?;
    let run = audit_lib(&root, EraBoundaries::default())?;
    let cal = Calendar::default();
    let (mut weeks, mut paid_weeks) = (0usize, 0usize);
    let mut worst_ms = 0i64;
    for b in &run.bundles {
        let t = truth
            .driver(&b.bundle.driver_id)
            .ok_or("driver missing from ground truth")?;
        let segs = &b.segments.segments;
        let all_weeks: BTreeSet<_> = t
            .weeks
            .keys()
            .chain(b.weeks.iter().map(|r| &r.iso_week))
            .copied()
            .collect();
        for w in all_weeks {
            let got = state_totals_ms(segs, &cal.week_range(w));
            let want = t.weeks.get(&w).cloned().unwrap_or_default();
            for (g, e) in got.iter().zip([want.standby_ms, want.en_route_ms, want.on_trip_ms]) {
                worst_ms = worst_ms.max((g - e).abs());
                ensure!(
                    (g - e).abs() <= 1000,
                    "{} {w}: state total {g} ms vs schedule {e} ms",
                    b.bundle.driver_id
                );
            }
        }
        for r in &b.weeks {
            weeks += 1;
            ensure!(
                r.hours_platform <= r.hours_tribunal,
                "{} {}: platform {}h above tribunal {}h",
                r.driver_id,
                r.iso_week,
                r.hours_platform,
                r.hours_tribunal
            );
            let pay = r.net_pay.minor_units as f64 / 100.0;
            if pay >= 0.0 && r.hours_platform > 0.0 {
                paid_weeks += 1;
                ensure!(
                    pay / r.hours_platform >= pay / r.hours_tribunal,
                    "{} {}: platform rate below tribunal rate",
                    r.driver_id,
                    r.iso_week
                );
            }
        }
    }
    ensure!(weeks > 0, "no driver-weeks");
    Ok(format!(
        "{weeks} driver-weeks; worst state-total error {worst_ms} ms; rate dominance on {paid_weeks} paid weeks"
    ))
}

// 4 ------------------------------------------------------------------------

fn per_minute_pattern(dir: &Path) -> Result<String, String> {
    let (root, truth) = synth(
        dir,
        r#"{"seed": 404, "n_drivers": 20, "start": "2023-02-01", "end": "2023-08-01",
            "eras": {"opaque_from": "2000-01", "dynamic_from": "2000-02"}}"#,
    )?;
    ensure!(truth.config.share.slope > 0.0, "fixture share does not fall with fare");
    let run = audit_lib(&root, all_dynamic())?;
    let linked: Vec<LinkedTrip> = run.bundles.iter().flat_map(|b| b.link.linked.iter().cloned()).collect();
    let mut bins = per_minute_fare_by_split(&linked, &ShareBins::default());
    ensure!(bins.len() >= 3, "only {} populated bins", bins.len());
    for b in &bins {
        ensure!(
            b.driver_minor + b.platform_minor == b.fare_minor,
            "bin {}: {} + {} != {}",
            b.label,
            b.driver_minor,
            b.platform_minor,
            b.fare_minor
        );
    }
    bins.reverse();
    for w in bins.windows(2) {
        ensure!(
            w[1].platform_per_min > w[0].platform_per_min,
            "platform £/min not increasing from {} ({:.4}) to {} ({:.4})",
            w[0].label,
            w[0].platform_per_min,
            w[1].label,
            w[1].platform_per_min
        );
        ensure!(
            w[1].driver_per_min <= w[0].driver_per_min,
            "driver £/min rises from {} ({:.4}) to {} ({:.4})",
            w[0].label,
            w[0].driver_per_min,
            w[1].label,
            w[1].driver_per_min
        );
    }
    let path: Vec<String> = bins
        .iter()
        .map(|b| format!("{}:{:.3}/{:.3}", b.label, b.driver_per_min, b.platform_per_min))
        .collect();
    Ok(format!(
        "driver/platform £/min by bin, high share first: {}",
        path.join(" ")
    ))
}

// 5 ------------------------------------------------------------------------

struct Cell {
    test_year: i64,
    train: Vec<i64>,
    r2: Option<f64>,
}

fn matrix_cells(path: &Path) -> Result<(Vec<Cell>, usize), String> {
    let v = read_json(path)?;
    let rows: usize = v["rows_per_year"]
        .as_object()
        .ok_or("rows_per_year missing")?
        .values()
        .filter_map(|x| x.as_u64())
        .sum::<u64>() as usize;
    let cells = v["matrix"]["cells"]
        .as_array()
        .ok_or("cells missing")?
        .iter()
        .map(|c| Cell {
            test_year: c["test_year"].as_i64().unwrap_or_default(),
            train: c["train_years"]
                .as_array()
                .map(|a| a.iter().filter_map(|y| y.as_i64()).collect())
                .unwrap_or_default(),
            r2: c["r2"].as_f64(),
        })
        .collect();
    Ok((cells, rows))
}

const FIXED_ERAS: &str = r#""eras": {"opaque_from": "2099-01", "dynamic_from": "2099-02"}"#;

fn predictability_shift(dir: &Path) -> Result<String, String> {
    let eras = "2099-01,2099-02";
    let (root, _) = synth(
        &dir.join("stationary"),
        &format!(r#"{{"seed": 505, "n_drivers": 12, "start": "2021-01-01", "end": "2024-01-01", {FIXED_ERAS}}}"#),
    )?;
    let mut stationary_min = f64::INFINITY;
    let mut runtime = 0.0f64;
    let mut trips = 0;
    for mode in ["single_year", "cumulative"] {
        let out = dir.join(format!("stationary_{mode}"));
        let started = Instant::now();
        run_ok(
            &[
                "predict",
                p(&root),
                "--out",
                p(&out),
                "--mode",
                mode,
                "--era-boundaries",
                eras,
            ],
            &[],
        )?;
        runtime = runtime.max(started.elapsed().as_secs_f64());
        let (cells, rows) = matrix_cells(&out.join("year_matrix.json"))?;
        trips = rows;
        for c in &cells {
            let r =
                c.r2.ok_or(format!("stationary {mode} cell {} has no R²", c.test_year))?;
            stationary_min = stationary_min.min(r);
        }
    }
    ensure!(trips >= 100_000, "stationary fixture has only {trips} trips");
    ensure!(stationary_min >= 0.9, "stationary minimum R² {stationary_min:.3}");
    ensure!(runtime < 120.0, "predict took {runtime:.1}s");

    // the fare rule changes on 2023-01-01
    let switch = 2023;
    let (root, _) = synth(
        &dir.join("switch"),
        &format!(
            r#"{{"seed": 506, "n_drivers": 9, "start": "2021-01-01", "end": "2025-01-01", {FIXED_ERAS},
                "fare_epochs": [
                  {{"from": "2000-01-01"}},
                  {{"from": "2023-01-01", "rule": {{"base": 15.0, "per_mile": 0.1, "per_minute": 0.02,
                     "airport_origin": 0.0, "airport_dest": 12.0, "peak": 9.0, "night": 7.0, "weekend": 5.0,
                     "product": {{"comfort": 0.0, "xl": 6.0, "exec": 1.0}}}}}}
                ]}}"#
        ),
    )?;
    let (mut cross_max, mut within_min) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut n_cross, mut n_within) = (0, 0);
    for mode in ["single_year", "cumulative"] {
        let out = dir.join(format!("switch_{mode}"));
        run_ok(
            &[
                "predict",
                p(&root),
                "--out",
                p(&out),
                "--mode",
                mode,
                "--era-boundaries",
                eras,
            ],
            &[],
        )?;
        let (cells, _) = matrix_cells(&out.join("year_matrix.json"))?;
        for c in &cells {
            let post_test = c.test_year >= switch;
            let all_pre = c.train.iter().all(|&y| y < switch);
            let all_post = c.train.iter().all(|&y| y >= switch);
            if post_test && all_pre {
                let r = c.r2.ok_or("cross-regime cell without R²")?;
                n_cross += 1;
                cross_max = cross_max.max(r);
                ensure!(r < 0.3, "{mode} train {:?} test {}: R² {r:.3}", c.train, c.test_year);
            } else if (post_test && all_post) || (!post_test && all_pre) {
                let r = c.r2.ok_or("within-regime cell without R²")?;
                n_within += 1;
                within_min = within_min.min(r);
                ensure!(r >= 0.9, "{mode} train {:?} test {}: R² {r:.3}", c.train, c.test_year);
            }
        }
    }
    ensure!(
        n_cross > 0 && n_within > 0,
        "switch fixture produced no comparable cells"
    );
    Ok(format!(
        "stationary min R² {stationary_min:.3} over {trips} trips in {runtime:.1}s; \
         switch: {n_cross} cross cells max {cross_max:.3}, {n_within} within cells min {within_min:.3}"
    ))
}

// 6 ------------------------------------------------------------------------

fn trip_in(driver: &DriverId, start: Timestamp, minutes: i64, fare_minor: i64) -> TripRecord {
    TripRecord {
        driver_id: driver.clone(),
        request_ts: start,
        accept_ts: Some(start),
        pickup_ts: Some(start),
        dropoff_ts: Some(start.plus_secs(minutes * 60)),
        cancel_ts: None,
        distance_miles: 5.0,
        status: TripStatus::Completed,
        original_fare: Some(Money::gbp(fare_minor)),
        origin_tag: String::new(),
        dest_tag: String::new(),
        product: "uberx".into(),
        pickup_address: None,
        dropoff_address: None,
        vehicle_plate: None,
    }
}

fn surplus_gap(_dir: &Path) -> Result<String, String> {
    let cal = Calendar::default();
    // opaque era is the single month 2022-02
    let eras = EraBoundaries::new(YearMonth::new(2022, 2), YearMonth::new(2022, 3)).unwrap();
    let driver = DriverId::new("d1");
    let mut linked = Vec::new();
    let mut segments = Vec::new();
    // (month, fare, pay): margins £8, unknown, £12, unknown
    for (month, fare, pay) in [(1, 2000, 1200), (2, 2000, 1500), (3, 3000, 1800), (4, 2000, 1500)] {
        let start = cal.parse_timestamp(&format!("2022-{month:02}-10T12:00:00Z")).unwrap();
        let trip = trip_in(&driver, start, 60, fare);
        let pay = PaymentEvent {
            driver_id: driver.clone(),
            ts: start.plus_secs(3600 + 30),
            category: PaymentCategory::TripEarnings,
            amount: Money::gbp(pay),
            memo: None,
        };
        segments.push(ActivitySegment {
            driver_id: driver.clone(),
            start_ts: start,
            end_ts: start.plus_secs(3600),
            state: SegmentState::OnTrip,
        });
        let mut l = LinkedTrip::new(trip, vec![pay], &eras, &cal);
        if month == 4 {
            // a later month with no usable fare either
            l.rider_fare = None;
            l.driver_share = None;
            l.platform_share = None;
        }
        linked.push(l);
    }
    ensure!(
        linked[1].era == Era::OpaqueGap,
        "fixture month 2 is not in the opaque era"
    );
    let (_, series) = surplus_series(
        &linked,
        &segments,
        YearMonth::new(2022, 1),
        YearMonth::new(2022, 4),
        &cal,
    );
    let at = |m: u32| series.iter().find(|p| p.month == YearMonth::new(2022, m)).cloned();
    let jan = at(1).ok_or("no 2022-01 point")?;
    let feb = at(2).ok_or("no 2022-02 point")?;
    let mar = at(3).ok_or("no 2022-03 point")?;
    let apr = at(4).ok_or("no 2022-04 point")?;
    ensure!(
        jan.value == Some(8.0) && jan.status == PointStatus::Direct,
        "2022-01: {jan:?}"
    );
    ensure!(
        mar.value == Some(12.0) && mar.status == PointStatus::Direct,
        "2022-03: {mar:?}"
    );
    ensure!(
        feb.status == PointStatus::Interpolated && feb.value.map(|v| (v - 10.0).abs() < 1e-12) == Some(true),
        "gap month: {feb:?}"
    );
    ensure!(
        apr.value.is_none() && apr.status == PointStatus::Missing,
        "trailing edge: {apr:?}"
    );

    // leading edge through the generic interpolator
    let m = |k: u32| YearMonth::new(2022, k);
    let raw: BTreeMap<YearMonth, Option<f64>> =
        [(m(1), None), (m(2), Some(8.0)), (m(3), None), (m(4), Some(12.0))].into();
    let pts = interpolate_gaps(&raw);
    ensure!(
        pts[0].value.is_none() && pts[0].status == PointStatus::Missing,
        "leading edge: {:?}",
        pts[0]
    );
    ensure!(
        pts[2].value == Some(10.0) && pts[2].status == PointStatus::Interpolated,
        "gap: {:?}",
        pts[2]
    );
    Ok("gap month £10.00 interpolated between £8 and £12; leading and trailing edges missing".into())
}

// 7 ------------------------------------------------------------------------

fn inflation_identity(_dir: &Path) -> Result<String, String> {
    let first = YearMonth::new(2020, 1);
    let months: Vec<YearMonth> = (0..48).map(|i| first.plus_months(i)).collect();
    let series: BTreeMap<YearMonth, f64> = months
        .iter()
        .enumerate()
        .map(|(i, &m)| (m, 9.0 + (i as f64 * 0.731).sin() * 3.0))
        .collect();
    let base = YearMonth::new(2022, 6);

    let zero = RpiSeries::new(months.iter().map(|&m| (m, 0.0)).collect()).map_err(|e| e.to_string())?;
    let same = adjust_inflation(&series, &zero, base).map_err(|e| e.to_string())?;
    ensure!(same == series, "zero RPI changed the series");

    let ten = RpiSeries::new(months.iter().map(|&m| (m, 10.0)).collect()).map_err(|e| e.to_string())?;
    let one: BTreeMap<YearMonth, f64> = [(base.plus_months(-12), 1.0), (base, 1.0), (base.plus_months(12), 1.0)].into();
    let adj = adjust_inflation(&one, &ten, base).map_err(|e| e.to_string())?;
    let back = adj[&base.plus_months(-12)];
    let fwd = adj[&base.plus_months(12)];
    ensure!((back - 1.10).abs() <= 1e-9, "12 months back: factor {back}");
    ensure!((fwd - 1.0 / 1.10).abs() <= 1e-9, "12 months forward: factor {fwd}");
    ensure!(adj[&base] == 1.0, "base month changed");
    Ok(format!(
        "zero RPI exact identity; 10% yoy over 12 months gives {back:.12}"
    ))
}

// 8 ------------------------------------------------------------------------

fn ols_correctness(_dir: &Path) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    // exact linear data
    let truth = [3.5, -2.0, 0.25, 7.0];
    let intercept = -1.5;
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..truth.len()).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| intercept + r.iter().zip(truth).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let names: Vec<String> = (0..truth.len()).map(|i| format!("x{i}")).collect();
    let x = Matrix::from_rows(&rows).ok_or("bad matrix")?;
    let m = fit_ols(&x, &y, &names).map_err(|e| e.to_string())?;
    let mut worst_coef = (m.intercept - intercept).abs();
    for (c, t) in m.coefficients.iter().zip(truth) {
        worst_coef = worst_coef.max((c - t).abs());
    }
    ensure!(worst_coef <= 1e-6, "coefficient error {worst_coef:e}");

    // pseudo-inverse oracle on random 500×60 systems
    let mut worst_r2 = 0.0f64;
    for _ in 0..5 {
        let (n, d) = (500, 60);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let beta: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(-1.0..1.0))
            .collect();
        let names: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        let x = Matrix::from_rows(&rows).ok_or("bad matrix")?;
        let model = fit_ols(&x, &y, &names).map_err(|e| e.to_string())?;
        let ours = r2(&model, &x, &y).map_err(|e| e.to_string())?;

        let a = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
        let b = DVector::from_vec(y.clone());
        let coef = a.clone().pseudo_inverse(1e-12).map_err(|e| e.to_string())? * &b;
        let pred = &a * coef;
        let mean = y.iter().sum::<f64>() / n as f64;
        let ss_res: f64 = y.iter().zip(pred.iter()).map(|(t, p)| (t - p).powi(2)).sum();
        let ss_tot: f64 = y.iter().map(|t| (t - mean).powi(2)).sum();
        let oracle = 1.0 - ss_res / ss_tot;
        worst_r2 = worst_r2.max((ours - oracle).abs());
        ensure!((ours - oracle).abs() <= 1e-6, "R² {ours} vs pseudo-inverse {oracle}");
    }
    Ok(format!(
        "coefficient error {worst_coef:.1e}; worst R² gap vs pseudo-inverse {worst_r2:.1e}"
    ))
}

// 9 ------------------------------------------------------------------------

fn cohort_partition(dir: &Path) -> Result<String, String> {
    let (root, truth) = synth(
        dir,
        r#"{"seed": 909, "n_drivers": 20, "start": "2022-01-01", "end": "2024-02-01",
            "cohort": {"pre": {"first": "2022-02", "last": "2023-01"},
                       "post": {"first": "2023-02", "last": "2024-01"},
                       "drivers_missing_a_month": 3}}"#,
    )?;
    let out = dir.join("report");
    run_ok(
        &[
            "audit",
            p(&root),
            "--out",
            p(&out),
            "--cohort-pre",
            "2022-02..2023-01",
            "--cohort-post",
            "2023-02..2024-01",
        ],
        &[],
    )?;
    let report = read_json(&out.join("audit_report.json"))?;
    let split = &report["cohort"]["split"];
    let ids = |key: &str| -> BTreeSet<String> {
        split[key]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    };
    let (less, more, missing) = (
        ids("paid_less"),
        ids("paid_same_or_more"),
        ids("excluded_missing_month"),
    );

    let idle: BTreeSet<String> = truth
        .drivers
        .iter()
        .filter(|d| d.idle_month.is_some())
        .map(|d| d.driver_id.to_string())
        .collect();
    let want = |g: CohortGroup| -> BTreeSet<String> {
        truth
            .drivers
            .iter()
            .filter(|d| d.idle_month.is_none() && d.cohort_group == Some(g))
            .map(|d| d.driver_id.to_string())
            .collect()
    };
    ensure!(idle.len() == 3, "generator idled {} drivers", idle.len());
    ensure!(missing == idle, "excluded {missing:?}, idle {idle:?}");
    ensure!(
        less == want(CohortGroup::PaidLess),
        "paid_less {less:?} vs {:?}",
        want(CohortGroup::PaidLess)
    );
    ensure!(
        more == want(CohortGroup::PaidSameOrMore),
        "paid_same_or_more {more:?} vs {:?}",
        want(CohortGroup::PaidSameOrMore)
    );
    Ok(format!(
        "{} paid less, {} same or more, {} excluded for a missing month; all as generated",
        less.len(),
        more.len(),
        missing.len()
    ))
}

// 10 -----------------------------------------------------------------------

fn anonymisation(dir: &Path) -> Result<String, String> {
    let (root, truth) = synth(
        dir,
        r#"{"seed": 1010, "n_drivers": 6, "start": "2023-01-01", "end": "2023-03-01", "pii_markers": true}"#,
    )?;
    let marker = truth.pii_marker.clone().ok_or("fixture has no marker")?;
    let seeded: usize = all_bytes(&root)
        .iter()
        .map(|(_, b)| contains(b, marker.as_bytes()))
        .sum();
    ensure!(seeded > 0, "fixture carries no marker strings");

    let salt_a = "correct horse battery staple";
    let salt_b = "a different salt of some length";
    let anon = |out: &Path, salt: &str| run_ok(&["anon", p(&root), "--out", p(out)], &[("GIGAUDIT_SALT", salt)]);
    let (a1, a2, b1) = (dir.join("anon_a1"), dir.join("anon_a2"), dir.join("anon_b"));
    anon(&a1, salt_a)?;
    anon(&a2, salt_a)?;
    anon(&b1, salt_b)?;

    let no_salt = run(&["anon", p(&root), "--out", p(&dir.join("anon_none"))], &[]);
    ensure!(
        no_salt.status.code() == Some(4),
        "missing salt exited {:?}",
        no_salt.status.code()
    );

    let report = dir.join("anon_report");
    run_ok(&["audit", p(&a1), "--out", p(&report), "--csv", "--charts"], &[])?;
    let mut leaks = Vec::new();
    for d in [&a1, &report] {
        for (rel, bytes) in all_bytes(d) {
            if contains(&bytes, marker.as_bytes()) > 0 {
                leaks.push(rel);
            }
        }
    }
    ensure!(leaks.is_empty(), "marker found in {leaks:?}");

    let names = |d: &Path| -> BTreeSet<String> {
        std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect()
    };
    let ids_a = names(&a1);
    ensure!(
        ids_a.len() == truth.drivers.len(),
        "{} pseudonyms for {} drivers",
        ids_a.len(),
        truth.drivers.len()
    );
    ensure!(
        ids_a
            .iter()
            .all(|s| s.len() == 16 && s.chars().all(|c| c.is_ascii_hexdigit())),
        "non 16-hex pseudonym in {ids_a:?}"
    );
    let oracle: BTreeSet<String> = truth
        .drivers
        .iter()
        .map(|d| {
            let mut mac = Hmac::<Sha256>::new_from_slice(salt_a.as_bytes()).unwrap();
            mac.update(d.driver_id.as_str().as_bytes());
            hex::encode(&mac.finalize().into_bytes()[..8])
        })
        .collect();
    ensure!(ids_a == oracle, "pseudonyms differ from keyed-hash oracle");
    ensure!(tree_digest(&a1) == tree_digest(&a2), "same salt gave different output");
    ensure!(names(&b1).is_disjoint(&ids_a), "different salts share pseudonyms");
    Ok(format!(
        "{seeded} seeded markers, 0 in anonymised bundles or their audit; {} distinct pseudonyms, stable per salt",
        ids_a.len()
    ))
}

// 11 -----------------------------------------------------------------------

fn determinism(dir: &Path) -> Result<String, String> {
    let config = r#"{"seed": 1111, "n_drivers": 8, "start": "2021-06-01", "end": "2023-10-01"}"#;
    let (root, _) = synth(&dir.join("a"), config)?;
    let (root_b, _) = synth(&dir.join("b"), config)?;
    ensure!(
        tree_digest(&root) == tree_digest(&root_b),
        "synth output differs for the same seed"
    );

    let mut audits = Vec::new();
    for (tag, jobs) in [("j1", "1"), ("j4", "4"), ("j4again", "4")] {
        let out = dir.join(format!("audit_{tag}"));
        run_ok(
            &["audit", p(&root), "--out", p(&out), "--jobs", jobs, "--csv", "--charts"],
            &[],
        )?;
        audits.push(tree_digest(&out));
    }
    ensure!(
        audits.windows(2).all(|w| w[0] == w[1]),
        "audit outputs differ between runs"
    );

    let mut predicts = Vec::new();
    for (tag, jobs) in [("j1", "1"), ("j3", "3"), ("j3again", "3")] {
        let out = dir.join(format!("predict_{tag}"));
        run_ok(
            &["predict", p(&root), "--out", p(&out), "--jobs", jobs, "--seed", "7"],
            &[],
        )?;
        predicts.push(tree_digest(&out));
    }
    ensure!(
        predicts.windows(2).all(|w| w[0] == w[1]),
        "predict outputs differ between runs"
    );
    Ok(format!(
        "synth, audit ({} files) and predict ({} files) byte-identical across runs and --jobs",
        audits[0].len(),
        predicts[0].len()
    ))
}

fn main() {
    let checks: [(&str, Check); 11] = [
        ("fixed-era round trip", fixed_era_round_trip),
        ("dynamic-era round trip", dynamic_era_round_trip),
        ("working-time dominance", working_time_dominance),
        ("per-minute split pattern", per_minute_pattern),
        ("predictability shift", predictability_shift),
        ("surplus gap handling", surplus_gap),
        ("inflation identity and compounding", inflation_identity),
        ("OLS correctness", ols_correctness),
        ("cohort partition", cohort_partition),
        ("anonymisation", anonymisation),
        ("determinism", determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let n = i + 1;
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) && f != &n.to_string() {
                continue;
            }
        }
        let dir = tmp.path().join(format!("c{n:02}"));
        let started = Instant::now();
        let result = std::panic::catch_unwind(|| check(&dir)).unwrap_or_else(|e| {
            Err(format!(
                "panicked: {:?}",
                e.downcast_ref::<String>().cloned().unwrap_or_default()
            ))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("acceptance {n:>2} PASS {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("acceptance {n:>2} FAIL {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
