use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use rayon::prelude::*;

use super::truth::{share_truth, CorruptionRecord, DriverTruth, GroundTruth, Pairing, WeekTruth};
use super::{GenConfig, SynthError};
use crate::ingest::{serialize_bundle, NormalizedBundle, TableKind};
use crate::metrics::CohortGroup;
use crate::model::{
    AgeBand, AppSession, Calendar, DispatchOffer, DriverId, DriverProfile, Era, Gender, Money, PaymentCategory,
    PaymentEvent, Timestamp, TripRecord, TripStatus, YearMonth,
};

pub const PII_MARKER: &str = "PIIMARK";

/// Per-driver settings decided before simulation.
#[derive(Clone, Debug)]
struct DriverPlan {
    index: usize,
    id: DriverId,
    gender: String,
    age_band: String,
    cohort_group: Option<CohortGroup>,
    idle_month: Option<YearMonth>,
}

struct DriverRun {
    bundle: NormalizedBundle,
    truth: DriverTruth,
    /// (unclamped mean share, realised share) of dynamic-era trips.
    shares: Vec<(f64, f64)>,
}

fn driver_id(i: usize) -> DriverId {
    DriverId::new(format!("driver_{:04}", i + 1))
}

/// Exact quota assignment by largest remainder, in shuffled order.
fn quota_labels(mix: &BTreeMap<String, f64>, n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let total: f64 = mix.values().sum();
    let raw: Vec<(&String, f64)> = mix.iter().map(|(k, &w)| (k, w / total * n as f64)).collect();
    let mut counts: Vec<usize> = raw.iter().map(|(_, q)| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    // largest remainder first, ties by label order
    order.sort_by(|&a, &b| {
        let (ra, rb) = (raw[a].1.fract(), raw[b].1.fract());
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    let mut labels: Vec<String> = raw
        .iter()
        .zip(&counts)
        .flat_map(|((k, _), &c)| std::iter::repeat_n((*k).clone(), c))
        .collect();
    labels.shuffle(rng);
    labels
}

fn plans(cfg: &GenConfig) -> Vec<DriverPlan> {
    let n = cfg.n_drivers;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let genders = quota_labels(&cfg.gender_mix, n, &mut rng);
    let ages = quota_labels(&cfg.age_mix, n, &mut rng);
    let mut groups = vec![None; n];
    let mut idle = vec![None; n];
    if let Some(c) = &cfg.cohort {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let cut = (c.paid_less_fraction * n as f64).round() as usize;
        for (k, &i) in perm.iter().enumerate() {
            groups[i] = Some(if k < cut {
                CohortGroup::PaidLess
            } else {
                CohortGroup::PaidSameOrMore
            });
        }
        perm.shuffle(&mut rng);
        for &i in perm.iter().take(c.drivers_missing_a_month) {
            idle[i] = Some(c.pre.first.plus_months(rng.gen_range(0..c.pre.len())));
        }
    }
    (0..n)
        .map(|i| DriverPlan {
            index: i,
            id: driver_id(i),
            gender: genders[i].clone(),
            age_band: ages[i].clone(),
            cohort_group: groups[i],
            idle_month: idle[i],
        })
        .collect()
}

fn round_to(x: f64, q: i64) -> i64 {
    ((x / q as f64).round() as i64).max(1) * q
}

fn pii(cfg: &GenConfig, what: &str, id: &DriverId, n: usize) -> Option<String> {
    cfg.pii_markers.then(|| format!("{PII_MARKER}-{what}-{id}-{n}"))
}

struct Sim<'a> {
    cfg: &'a GenConfig,
    cal: Calendar,
    quantum: i64,
    plan: &'a DriverPlan,
    rng: ChaCha8Rng,
    acceptance: f64,
    trips: Vec<TripRecord>,
    payments: Vec<PaymentEvent>,
    dispatches: Vec<DispatchOffer>,
    sessions: Vec<AppSession>,
    /// (start, end, state index: 1 en route, 2 on trip)
    intervals: Vec<(i64, i64, usize)>,
    pairings: Vec<Pairing>,
    shares: Vec<(f64, f64)>,
    accepted: usize,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a GenConfig, plan: &'a DriverPlan) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(plan.index as u64 + 1);
        let acceptance = rng.gen_range(cfg.acceptance_min..=cfg.acceptance_max);
        Sim {
            cfg,
            cal: Calendar::default(),
            quantum: cfg.fare_quantum(),
            plan,
            rng,
            acceptance,
            trips: Vec::new(),
            payments: Vec::new(),
            dispatches: Vec::new(),
            sessions: Vec::new(),
            intervals: Vec::new(),
            pairings: Vec::new(),
            shares: Vec::new(),
            accepted: 0,
        }
    }

    fn secs(&mut self, lo: f64, hi: f64) -> i64 {
        self.rng.gen_range(lo..hi).round() as i64
    }

    fn pay_multiplier(&self, ts: Timestamp) -> f64 {
        match (&self.cfg.cohort, self.plan.cohort_group) {
            (Some(c), Some(g)) if c.post.contains(self.cal.month(ts)) => match g {
                CohortGroup::PaidLess => 1.0 - c.cut,
                CohortGroup::PaidSameOrMore => 1.0 + c.raise,
            },
            _ => 1.0,
        }
    }

    fn product(&mut self) -> String {
        let total: f64 = self.cfg.products.values().sum();
        let mut u = self.rng.gen_range(0.0..total);
        for (name, &w) in &self.cfg.products {
            if u < w {
                return name.clone();
            }
            u -= w;
        }
        self.cfg.products.keys().last().expect("non-empty").clone()
    }

    fn memo(&self) -> Option<String> {
        pii(self.cfg, "memo", &self.plan.id, self.payments.len())
    }

    fn pay(&mut self, ts: Timestamp, category: PaymentCategory, minor: i64) {
        let memo = self.memo();
        self.payments.push(PaymentEvent {
            driver_id: self.plan.id.clone(),
            ts,
            category,
            amount: Money::gbp(minor),
            memo,
        });
    }

    fn day(&mut self, date: NaiveDate) {
        let cfg = self.cfg;
        let login = self
            .cal
            .start_of_day(date)
            .plus_secs(self.secs(6.0 * 3600.0, 15.0 * 3600.0));
        let shift_end = login.plus_secs(self.secs(cfg.shift_hours_min * 3600.0, cfg.shift_hours_max * 3600.0 + 1.0));
        let inflation = if cfg.eras.era_of(login, &self.cal) == Era::DynamicPricing {
            cfg.standby_inflation
        } else {
            1.0
        };
        let gap = Exp::new(1.0 / (cfg.standby_mean_minutes * 60.0 * inflation)).expect("positive rate");
        let mut t = login;
        loop {
            let offer = t.plus_secs((gap.sample(&mut self.rng).round() as i64).max(1));
            if offer > shift_end {
                break;
            }
            let accepted = self.rng.gen_bool(self.acceptance);
            self.dispatches.push(DispatchOffer {
                driver_id: self.plan.id.clone(),
                offered_ts: offer,
                accepted,
            });
            if !accepted {
                t = offer.plus_secs(15);
                continue;
            }
            self.accepted += 1;
            t = self.trip(offer);
        }
        let logout = t.plus_secs(self.secs(60.0, 600.0));
        self.sessions.push(AppSession {
            driver_id: self.plan.id.clone(),
            login_ts: login,
            logout_ts: logout,
        });
    }

    /// Simulates one accepted offer; returns when the driver is free again.
    fn trip(&mut self, offer: Timestamp) -> Timestamp {
        let cfg = self.cfg;
        let request = offer.plus_secs(-self.secs(5.0, 40.0));
        let accept = offer.plus_secs(self.secs(3.0, 12.0));
        let product = self.product();
        let id = self.plan.id.clone();
        let n = self.trips.len();
        if self.rng.gen_bool(cfg.rider_cancel_rate) {
            let cancel = accept.plus_secs(self.secs(60.0, 300.0));
            self.intervals.push((accept.0, cancel.0, 1));
            self.trips.push(TripRecord {
                driver_id: id.clone(),
                request_ts: request,
                accept_ts: Some(accept),
                pickup_ts: None,
                dropoff_ts: None,
                cancel_ts: Some(cancel),
                distance_miles: 0.0,
                status: TripStatus::RiderCancelled,
                original_fare: None,
                origin_tag: String::new(),
                dest_tag: String::new(),
                product,
                pickup_address: pii(cfg, "pickup", &id, n),
                dropoff_address: None,
                vehicle_plate: pii(cfg, "plate", &id, 0),
            });
            return cancel;
        }

        let route_min = self.rng.gen_range(2.0..10.0);
        let pickup = accept.plus_secs((route_min * 60.0f64).round() as i64);
        let u = self.rng.gen_range(0.0..1.0);
        let (ao, ad) = (
            u < cfg.airport_origin_rate,
            (cfg.airport_origin_rate..cfg.airport_origin_rate + cfg.airport_dest_rate).contains(&u),
        );
        let mut dist: f64 = LogNormal::new(3.0f64.ln(), 0.6)
            .expect("valid")
            .sample(&mut self.rng)
            .clamp(0.3, 30.0);
        if ao || ad {
            dist += self.rng.gen_range(8.0..15.0);
        }
        dist = (dist * 100.0).round() / 100.0;
        let trip_min = 2.0 + dist * self.rng.gen_range(2.0..3.0);
        let dropoff = pickup.plus_secs((trip_min * 60.0).round() as i64);
        let on_min = (dropoff.0 - pickup.0) as f64 / 60_000.0;
        let en_min = (pickup.0 - accept.0) as f64 / 60_000.0;

        let rule = cfg.fare_rule(self.cal.date(pickup));
        let hour = self.cal.hour(pickup);
        let dow = self.cal.weekday(pickup);
        let mut fare = rule.base
            + rule.per_mile * dist
            + rule.per_minute * on_min
            + rule.per_en_route_minute * en_min
            + rule.peak * ((7..=9).contains(&hour) || (17..=19).contains(&hour)) as u8 as f64
            + rule.night * (!(6..22).contains(&hour)) as u8 as f64
            + rule.weekend * (dow >= 5) as u8 as f64
            + rule.product.get(&product).copied().unwrap_or(0.0);
        if ao {
            fare += rule.airport_origin;
        }
        if ad {
            fare += rule.airport_dest;
        }
        if rule.noise_sd > 0.0 {
            fare += Normal::new(0.0, rule.noise_sd).expect("valid").sample(&mut self.rng);
        }
        let fare = fare.max(rule.minimum);
        let m = self.pay_multiplier(request);
        let (fare_minor, pay_minor, exported) = match cfg.eras.era_of(request, &self.cal) {
            Era::FixedCommission => {
                let f = round_to(fare * m * 100.0, self.quantum);
                let p = (f as f64 * (1.0 - cfg.commission)).round() as i64;
                (f, p, f)
            }
            Era::OpaqueGap => {
                let f = round_to(fare * m * 100.0, self.quantum);
                let p = (f as f64 * (1.0 - cfg.commission)).round() as i64;
                // the export carries the driver's pay in the fare column
                (f, p, p)
            }
            Era::DynamicPricing => {
                let s = &cfg.share;
                let mu = s.mean_at(fare);
                let share =
                    (mu + Normal::new(0.0, s.noise_sd).expect("valid").sample(&mut self.rng)).clamp(s.min, s.max);
                let f = ((fare * m * 100.0).round() as i64).max(1);
                let p = (share * f as f64).round() as i64;
                self.shares.push((mu, p as f64 / f as f64));
                (f, p, f)
            }
        };

        self.intervals.push((accept.0, pickup.0, 1));
        self.intervals.push((pickup.0, dropoff.0, 2));
        self.trips.push(TripRecord {
            driver_id: id.clone(),
            request_ts: request,
            accept_ts: Some(accept),
            pickup_ts: Some(pickup),
            dropoff_ts: Some(dropoff),
            cancel_ts: None,
            distance_miles: dist,
            status: TripStatus::Completed,
            original_fare: Some(Money::gbp(exported)),
            origin_tag: if ao { "airport".into() } else { "city".into() },
            dest_tag: if ad { "airport".into() } else { "city".into() },
            product,
            pickup_address: pii(cfg, "pickup", &id, n),
            dropoff_address: pii(cfg, "dropoff", &id, n),
            vehicle_plate: pii(cfg, "plate", &id, 0),
        });

        let jitter = if cfg.payment_jitter_seconds > 0.0 {
            Normal::new(0.0, cfg.payment_jitter_seconds)
                .expect("valid")
                .sample(&mut self.rng)
                .abs()
                .round() as i64
        } else {
            0
        };
        let paid_at = dropoff.plus_secs(jitter);
        if pay_minor >= 2 && self.rng.gen_bool(cfg.split_earnings_rate) {
            let first = ((pay_minor as f64) * self.rng.gen_range(0.6..0.9)).round() as i64;
            self.pay(paid_at, PaymentCategory::TripEarnings, first);
            self.pay(paid_at, PaymentCategory::TripEarnings, pay_minor - first);
        } else {
            self.pay(paid_at, PaymentCategory::TripEarnings, pay_minor);
        }
        self.pairings.push(Pairing {
            dropoff_ms: dropoff.0,
            payment_ms: paid_at.0,
            fare_minor,
            pay_minor,
        });
        if ao {
            self.pay(paid_at, PaymentCategory::ThirdPartyFee, 500);
        }
        if self.rng.gen_bool(cfg.tip_rate) {
            let tip = self.rng.gen_range(1..=5) * 100;
            let at = dropoff.plus_secs(self.secs(600.0, 7200.0));
            self.pay(at, PaymentCategory::Tip, tip);
        }
        if self.rng.gen_bool(0.01) {
            let adj = -self.rng.gen_range(100..=300);
            let at = dropoff.plus_secs(86_400);
            self.pay(at, PaymentCategory::Adjustment, adj);
        }
        dropoff
    }
}

impl Sim<'_> {
    fn run(mut self) -> DriverRun {
        let cfg = self.cfg;
        let mut date = cfg.start;
        while date < cfg.end {
            let idle = self.plan.idle_month == Some(YearMonth::new(date.year(), date.month()));
            if !idle && self.rng.gen_bool(cfg.work_day_probability) {
                self.day(date);
            }
            date = date.succ_opt().expect("date in range");
        }
        let mut first_login: BTreeMap<crate::model::IsoWeek, Timestamp> = BTreeMap::new();
        for s in &self.sessions {
            first_login.entry(self.cal.iso_week(s.login_ts)).or_insert(s.login_ts);
        }
        for (_, login) in first_login {
            if self.rng.gen_bool(0.3) {
                let amount = self.rng.gen_range(10..=40) * 100;
                self.pay(login, PaymentCategory::Promotion, amount);
            }
        }
        self.payments.sort_by_key(|p| p.ts);

        let weeks = self.week_truth();
        let id = self.plan.id.clone();
        let profile = DriverProfile {
            driver_id: id.clone(),
            gender: self.plan.gender.parse::<Gender>().ok(),
            age_band: self.plan.age_band.parse::<AgeBand>().ok(),
            first_trip_ts: self
                .trips
                .first()
                .map(|t| t.request_ts)
                .unwrap_or_else(|| self.cal.start_of_day(cfg.start)),
            name: pii(cfg, "name", &id, 0),
            email: cfg.pii_markers.then(|| format!("{PII_MARKER}.{id}@example.com")),
        };
        let completed = self.trips.iter().filter(|t| t.is_completed()).count();
        let truth = DriverTruth {
            driver_id: id.clone(),
            acceptance_rate: self.acceptance,
            offers: self.dispatches.len(),
            accepted_offers: self.accepted,
            completed_trips: completed,
            cancelled_trips: self.trips.len() - completed,
            cohort_group: self.plan.cohort_group,
            idle_month: self.plan.idle_month,
            gender: self.plan.gender.clone(),
            age_band: self.plan.age_band.clone(),
            pairings: self.pairings,
            weeks,
            rows: BTreeMap::new(),
        };
        DriverRun {
            bundle: NormalizedBundle {
                driver_id: id,
                trips: self.trips,
                payments: self.payments,
                dispatches: self.dispatches,
                sessions: self.sessions,
                profile: Some(profile),
                stripped: BTreeSet::new(),
                tables: TableKind::ALL.into_iter().collect(),
            },
            truth,
            shares: self.shares,
        }
    }

    /// Splits `[start, end)` at local ISO-week boundaries.
    fn by_week(&self, start: i64, end: i64, mut f: impl FnMut(crate::model::IsoWeek, i64)) {
        let mut cursor = start;
        while cursor < end {
            let week = self.cal.iso_week(Timestamp(cursor));
            let stop = self.cal.week_range(week).end.0.min(end);
            f(week, stop - cursor);
            cursor = stop;
        }
    }

    fn week_truth(&self) -> BTreeMap<crate::model::IsoWeek, WeekTruth> {
        let mut weeks: BTreeMap<crate::model::IsoWeek, WeekTruth> = BTreeMap::new();
        for s in &self.sessions {
            self.by_week(s.login_ts.0, s.logout_ts.0, |w, ms| {
                weeks.entry(w).or_default().standby_ms += ms
            });
        }
        for &(s, e, state) in &self.intervals {
            self.by_week(s, e, |w, ms| {
                let slot = weeks.entry(w).or_default();
                slot.standby_ms -= ms;
                if state == 1 {
                    slot.en_route_ms += ms;
                } else {
                    slot.on_trip_ms += ms;
                }
            });
        }
        for p in &self.payments {
            weeks.entry(self.cal.iso_week(p.ts)).or_default().ledger_minor += p.amount.minor_units;
        }
        weeks
    }
}

/// Number of the `count` items dealt round-robin over `n` drivers that land
/// on driver `i`.
fn dealt(count: usize, n: usize, i: usize) -> usize {
    count / n + usize::from(i < count % n)
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Appends the driver's share of corrupt rows to the serialised tables.
fn corrupt(
    cfg: &GenConfig,
    index: usize,
    run: &DriverRun,
    tables: &mut BTreeMap<TableKind, String>,
    records: &mut Vec<CorruptionRecord>,
) {
    let (n, i) = (cfg.n_drivers, run.truth.driver_id.clone());
    let c = &cfg.corruptions;
    let completed: Vec<&TripRecord> = run.bundle.trips.iter().filter(|t| t.is_completed()).collect();
    let mut push = |table: TableKind, kind: &str, line: String, tables: &mut BTreeMap<TableKind, String>| {
        let text = tables.get_mut(&table).expect("table written");
        text.push_str(&line);
        records.push(CorruptionRecord {
            driver_id: i.clone(),
            table,
            kind: kind.to_string(),
            line: text.lines().count(),
        });
    };
    for k in 0..dealt(c.duplicate_trips, n, index) {
        let rows: Vec<String> = tables[&TableKind::Trips]
            .lines()
            .skip(1)
            .map(|l| format!("{l}\n"))
            .collect();
        if rows.is_empty() {
            break;
        }
        let line = rows[(k * 7919) % rows.len()].clone();
        push(TableKind::Trips, "duplicate_row", line, tables);
    }
    for k in 0..dealt(c.inverted_trips, n, index) {
        let Some(t) = completed.get((k * 104_729) % completed.len().max(1)) else {
            break;
        };
        let mut bad = (*t).clone();
        std::mem::swap(&mut bad.pickup_ts, &mut bad.dropoff_ts);
        let one = NormalizedBundle {
            driver_id: i.clone(),
            trips: vec![bad],
            payments: Vec::new(),
            dispatches: Vec::new(),
            sessions: Vec::new(),
            profile: None,
            stripped: BTreeSet::new(),
            tables: BTreeSet::from([TableKind::Trips]),
        };
        let text = serialize_bundle(&one).remove(&TableKind::Trips).expect("trips table");
        let line = text.lines().nth(1).expect("one row").to_string() + "\n";
        push(TableKind::Trips, "inverted_timestamps", line, tables);
    }
    for k in 0..dealt(c.malformed_money, n, index) {
        let ts = run.bundle.payments.get(k).map(|p| p.ts).unwrap_or(Timestamp(0));
        let line = csv_line(&[
            i.to_string(),
            ts.to_rfc3339(),
            PaymentCategory::TripEarnings.to_string(),
            format!("{}.{}.5O", 10 + k, k % 100),
            "GBP".to_string(),
            String::new(),
        ]);
        push(TableKind::Payments, "malformed_money", line, tables);
    }
}

/// Simulates every driver, writes one bundle directory per driver plus
/// `ground_truth.json` under `out`, and returns the ground truth.
/// Identical configurations produce byte-identical output.
pub fn generate(cfg: &GenConfig, out: &Path) -> Result<GroundTruth, SynthError> {
    cfg.validate()?;
    let plans = plans(cfg);
    let runs: Vec<DriverRun> = plans.par_iter().map(|p| Sim::new(cfg, p).run()).collect();

    let io = |e: std::io::Error| SynthError::Io(out.to_path_buf(), e);
    std::fs::create_dir_all(out).map_err(io)?;
    let mut corruptions = Vec::new();
    let mut drivers = Vec::with_capacity(runs.len());
    let (mut mus, mut realized) = (Vec::new(), Vec::new());
    for (index, run) in runs.into_iter().enumerate() {
        let mut tables = serialize_bundle(&run.bundle);
        corrupt(cfg, index, &run, &mut tables, &mut corruptions);
        let dir = out.join(run.bundle.driver_id.as_str());
        std::fs::create_dir_all(&dir).map_err(io)?;
        let mut truth = run.truth;
        for (kind, text) in &tables {
            std::fs::write(dir.join(kind.file_name()), text).map_err(io)?;
            truth.rows.insert(*kind, text.lines().count().saturating_sub(1));
        }
        for (m, s) in run.shares {
            mus.push(m);
            realized.push(s);
        }
        drivers.push(truth);
    }
    let truth = GroundTruth {
        config: cfg.clone(),
        fare_quantum: cfg.fare_quantum(),
        pii_marker: cfg.pii_markers.then(|| PII_MARKER.to_string()),
        drivers,
        dynamic_share: share_truth(&cfg.share, &mus, &realized),
        corruptions,
    };
    let mut json = serde_json::to_string_pretty(&truth).map_err(|e| SynthError::Serialize(e.to_string()))?;
    json.push('\n');
    std::fs::write(out.join(super::GROUND_TRUTH_FILE), json).map_err(io)?;
    Ok(truth)
}
