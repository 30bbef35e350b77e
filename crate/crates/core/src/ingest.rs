//! Crawl snapshot parsing, IP geolocation, per-country aggregation and
//! resampling onto uniform weekly windows.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use crate::format::{self, parse_f64, parse_i64};
use crate::{Error, IpRange, Result, WEEK_SECONDS};

/// Country code assigned to addresses outside every known range.
pub const UNKNOWN_COUNTRY: &str = "ZZ";
/// Entity code of the system-level (all countries) series.
pub const SYSTEM_ENTITY: &str = "ALL";

/// One crawl: the addresses seen and when.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlSnapshot {
    pub timestamp: i64,
    pub peers: Vec<u32>,
}

/// Parses `timestamp,dotted-quad` lines. The snapshot timestamp is the
/// earliest line timestamp.
pub fn parse_snapshot(text: &str) -> Result<CrawlSnapshot> {
    let mut timestamp: Option<i64> = None;
    let mut peers = Vec::new();
    for (line, content) in format::lines(text) {
        let (ts, ip) = content
            .split_once(',')
            .ok_or_else(|| Error::parse(line, "expected timestamp,ip"))?;
        let ts = parse_i64(ts, line)?;
        if ts < 0 {
            return Err(Error::parse(line, "negative timestamp"));
        }
        let ip: Ipv4Addr = ip
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid IPv4 address {:?}", ip.trim())))?;
        timestamp = Some(timestamp.map_or(ts, |t| t.min(ts)));
        peers.push(u32::from(ip));
    }
    let timestamp = timestamp.ok_or(Error::EmptySnapshot)?;
    Ok(CrawlSnapshot { timestamp, peers })
}

/// Offline IPv4 range database, sorted and disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeoDb {
    ranges: Vec<IpRange>,
}

impl GeoDb {
    /// Builds a database from arbitrary-order ranges, rejecting inverted or
    /// overlapping entries.
    pub fn new(mut ranges: Vec<IpRange>) -> Result<Self> {
        if let Some(r) = ranges.iter().find(|r| r.start > r.end) {
            return Err(Error::InvertedRange {
                start: r.start,
                end: r.end,
            });
        }
        ranges.sort_by_key(|r| (r.start, r.end));
        for pair in ranges.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::OverlappingRanges {
                    first: pair[0].clone(),
                    second: pair[1].clone(),
                });
            }
        }
        Ok(GeoDb { ranges })
    }

    pub fn ranges(&self) -> &[IpRange] {
        &self.ranges
    }

    /// Binary-search lookup; addresses in no range map to [`UNKNOWN_COUNTRY`].
    pub fn geolocate(&self, ip: u32) -> &str {
        let idx = self.ranges.partition_point(|r| r.start <= ip);
        match idx.checked_sub(1).map(|i| &self.ranges[i]) {
            Some(r) if ip <= r.end => &r.country,
            _ => UNKNOWN_COUNTRY,
        }
    }
}

/// Parses `start_int,end_int,ISO2` lines into a [`GeoDb`].
pub fn load_geodb(text: &str) -> Result<GeoDb> {
    let mut ranges = Vec::new();
    for (line, content) in format::lines(text) {
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(line, "expected start,end,country"));
        }
        let bound = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| Error::parse(line, format!("invalid address integer {s:?}")))
        };
        let country = fields[2];
        if country.len() != 2 || !country.bytes().all(|b| b.is_ascii_uppercase()) {
            return Err(Error::parse(
                line,
                format!("invalid country code {country:?}"),
            ));
        }
        ranges.push(IpRange {
            start: bound(fields[0])?,
            end: bound(fields[1])?,
            country: country.to_string(),
        });
    }
    GeoDb::new(ranges)
}

pub fn geolocate(ip: u32, db: &GeoDb) -> &str {
    db.geolocate(ip)
}

/// Peer counts of one entity over time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSeries {
    pub entity: String,
    pub points: Vec<(i64, u64)>,
}

/// Counts distinct addresses per country in each snapshot.
///
/// Every country seen in any snapshot gets a series with one point per
/// snapshot timestamp (zero where absent), plus the deduplicated
/// [`SYSTEM_ENTITY`] total. Snapshots sharing a timestamp are merged.
pub fn aggregate(snapshots: &[CrawlSnapshot], db: &GeoDb) -> Vec<CountSeries> {
    let mut by_time: BTreeMap<i64, BTreeSet<u32>> = BTreeMap::new();
    for snap in snapshots {
        by_time
            .entry(snap.timestamp)
            .or_default()
            .extend(snap.peers.iter().copied());
    }

    let mut per_country: BTreeMap<String, BTreeMap<i64, u64>> = BTreeMap::new();
    for (&ts, peers) in &by_time {
        for &ip in peers {
            *per_country
                .entry(db.geolocate(ip).to_string())
                .or_default()
                .entry(ts)
                .or_default() += 1;
        }
    }

    let mut out: Vec<CountSeries> = per_country
        .into_iter()
        .map(|(entity, counts)| CountSeries {
            entity,
            points: by_time
                .keys()
                .map(|ts| (*ts, counts.get(ts).copied().unwrap_or(0)))
                .collect(),
        })
        .collect();
    out.push(CountSeries {
        entity: SYSTEM_ENTITY.to_string(),
        points: by_time
            .iter()
            .map(|(ts, peers)| (*ts, peers.len() as u64))
            .collect(),
    });
    out
}

/// Writes `entity,timestamp,count` rows.
pub fn series_to_csv(series: &CountSeries) -> String {
    series
        .points
        .iter()
        .map(|(ts, c)| format!("{},{ts},{c}\n", series.entity))
        .collect()
}

/// Reads `entity,timestamp,count` rows, grouping by entity in first-seen
/// order. Timestamps must be strictly increasing within an entity.
pub fn series_from_csv(text: &str) -> Result<Vec<CountSeries>> {
    let mut out: Vec<CountSeries> = Vec::new();
    for (line, content) in format::lines(text) {
        let fields: Vec<&str> = content.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(line, "expected entity,timestamp,count"));
        }
        let entity = fields[0].trim();
        let ts = parse_i64(fields[1], line)?;
        let count = fields[2]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(line, format!("invalid count {:?}", fields[2].trim())))?;
        let series = match out.iter_mut().position(|s| s.entity == entity) {
            Some(i) => &mut out[i],
            None => {
                out.push(CountSeries {
                    entity: entity.to_string(),
                    points: Vec::new(),
                });
                out.last_mut().unwrap()
            }
        };
        if series.points.last().is_some_and(|&(prev, _)| prev >= ts) {
            return Err(Error::parse(line, "timestamps must be strictly increasing"));
        }
        series.points.push((ts, count));
    }
    Ok(out)
}

/// A uniformly sampled seven-day window of one entity's network size.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionWindow {
    pub entity: String,
    pub start: i64,
    pub samples: Vec<f64>,
    pub span: i64,
}

impl EvolutionWindow {
    /// Validates sample count and values.
    pub fn new(entity: impl Into<String>, start: i64, samples: Vec<f64>) -> Result<Self> {
        if !samples.len().is_power_of_two() {
            return Err(Error::NotPowerOfTwo(samples.len()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if samples.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("window samples must be non-negative"));
        }
        Ok(EvolutionWindow {
            entity: entity.into(),
            start,
            samples,
            span: WEEK_SECONDS,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Timestamp of sample `i`.
    pub fn sample_time(&self, i: usize) -> f64 {
        self.start as f64 + i as f64 * self.span as f64 / self.samples.len() as f64
    }

    /// Window file: header `entity,start,T`, then one sample per line.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},{}\n", self.entity, self.start, self.samples.len());
        for &v in &self.samples {
            out.push_str(&format::float(v));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = format::lines(text);
        let (line, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty window file"))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(line, "expected header entity,start,T"));
        }
        let start = parse_i64(fields[1], line)?;
        let len = parse_i64(fields[2], line)?;
        let samples = lines
            .map(|(line, v)| parse_f64(v, line))
            .collect::<Result<Vec<_>>>()?;
        if samples.len() as i64 != len {
            return Err(Error::parse(
                line,
                format!("header declares {len} samples, found {}", samples.len()),
            ));
        }
        Self::new(fields[0].trim(), start, samples)
    }
}

/// True when `text` is a window file (a three-field header followed by
/// single-value sample lines) rather than count rows. A lone three-field
/// line is a one-point count series.
pub fn looks_like_window(text: &str) -> bool {
    let mut lines = format::lines(text).map(|(_, l)| l.split(',').count());
    lines.next() == Some(3) && lines.next() == Some(1)
}

/// Linearly interpolates `series` onto `len` uniform points covering
/// `[window_start, window_start + 7 days)`, holding the nearest observed
/// value flat outside the observed range.
pub fn resample(series: &CountSeries, window_start: i64, len: usize) -> Result<EvolutionWindow> {
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    let window_end = window_start + WEEK_SECONDS;
    let pts = &series.points;
    let inside = pts
        .iter()
        .filter(|(t, _)| (window_start..=window_end).contains(t))
        .count();
    let before = pts.iter().any(|&(t, _)| t < window_start) as usize;
    let after = pts.iter().any(|&(t, _)| t > window_end) as usize;
    let usable = inside + before + after;
    if usable < 2 {
        return Err(Error::InsufficientData {
            entity: series.entity.clone(),
            usable,
        });
    }

    let step = WEEK_SECONDS as f64 / len as f64;
    let mut samples = Vec::with_capacity(len);
    // Grid times increase, so the bracketing segment only moves forward.
    let mut seg = 0;
    for i in 0..len {
        let g = window_start as f64 + i as f64 * step;
        let (t0, v0) = pts[0];
        let (tn, vn) = pts[pts.len() - 1];
        let value = if g <= t0 as f64 {
            v0 as f64
        } else if g >= tn as f64 {
            vn as f64
        } else {
            while (pts[seg + 1].0 as f64) < g {
                seg += 1;
            }
            let (ta, va) = (pts[seg].0 as f64, pts[seg].1 as f64);
            let (tb, vb) = (pts[seg + 1].0 as f64, pts[seg + 1].1 as f64);
            va + (vb - va) * (g - ta) / (tb - ta)
        };
        samples.push(value);
    }
    EvolutionWindow::new(series.entity.clone(), window_start, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_lookup(db: &GeoDb, ip: u32) -> &str {
        db.ranges()
            .iter()
            .find(|r| r.start <= ip && ip <= r.end)
            .map_or(UNKNOWN_COUNTRY, |r| r.country.as_str())
    }

    #[test]
    fn snapshot_parses_two_peers() {
        let s = parse_snapshot("100,1.0.0.1\n100,1.0.0.2").unwrap();
        assert_eq!(s.timestamp, 100);
        assert_eq!(s.peers, vec![16777217, 16777218]);
    }

    #[test]
    fn snapshot_uses_earliest_timestamp() {
        let s = parse_snapshot("105,1.0.0.1\n100,1.0.0.2\n").unwrap();
        assert_eq!(s.timestamp, 100);
    }

    #[test]
    fn empty_snapshot_is_rejected() {
        assert!(matches!(parse_snapshot(""), Err(Error::EmptySnapshot)));
        assert!(matches!(parse_snapshot("\n\n"), Err(Error::EmptySnapshot)));
    }

    #[test]
    fn bad_octet_names_line() {
        match parse_snapshot("100,999.0.0.1") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match parse_snapshot("100,1.0.0.1\nabc,1.0.0.2") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn geodb_single_range() {
        let db = load_geodb("16777216,16777471,AU").unwrap();
        assert_eq!(db.ranges().len(), 1);
        assert_eq!(geolocate(16777217, &db), "AU");
        assert_eq!(geolocate(0, &db), "ZZ");
        assert_eq!(geolocate(16777472, &db), "ZZ");
    }

    #[test]
    fn geodb_rejects_overlap_and_inversion() {
        let err = load_geodb("10,20,AA\n15,30,BB").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("[10, 20]") && msg.contains("[15, 30]"),
            "{msg}"
        );
        assert!(matches!(
            load_geodb("30,20,AA"),
            Err(Error::InvertedRange { start: 30, end: 20 })
        ));
    }

    #[test]
    fn geodb_sorts_unsorted_input() {
        let db = load_geodb("40,50,BB\n10,20,AA\n25,30,CC").unwrap();
        let starts: Vec<u32> = db.ranges().iter().map(|r| r.start).collect();
        assert_eq!(starts, vec![10, 25, 40]);
        assert_eq!(db.geolocate(17), "AA");
        assert_eq!(db.geolocate(17), linear_lookup(&db, 17));
    }

    #[test]
    fn geolocate_matches_linear_scan_exhaustively() {
        let db = load_geodb("3,5,AA\n7,7,BB\n9,12,CC\n20,30,DD").unwrap();
        for ip in 0..40 {
            assert_eq!(db.geolocate(ip), linear_lookup(&db, ip), "ip {ip}");
        }
    }

    #[test]
    fn geolocate_matches_linear_scan_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ranges = Vec::new();
        let mut cursor: u64 = 0;
        for i in 0..200 {
            cursor += rng.random_range(1..20_000_000u64);
            let len = rng.random_range(0..10_000_000u64);
            if cursor + len > u32::MAX as u64 {
                break;
            }
            ranges.push(IpRange {
                start: cursor as u32,
                end: (cursor + len) as u32,
                country: format!("{}{}", (b'A' + (i % 26) as u8) as char, 'X'),
            });
            cursor += len;
        }
        let db = GeoDb::new(ranges).unwrap();
        for _ in 0..1000 {
            let ip: u32 = rng.random();
            assert_eq!(db.geolocate(ip), linear_lookup(&db, ip));
        }
    }

    fn ip(s: &str) -> u32 {
        u32::from(s.parse::<Ipv4Addr>().unwrap())
    }

    #[test]
    fn aggregate_counts_and_system_total() {
        let db = load_geodb("16777216,16777471,AU").unwrap();
        let snap = CrawlSnapshot {
            timestamp: 50,
            peers: vec![ip("1.0.0.1"), ip("1.0.0.2"), ip("9.9.9.9"), ip("1.0.0.1")],
        };
        let out = aggregate(&[snap], &db);
        let get = |e: &str| out.iter().find(|s| s.entity == e).unwrap().points.clone();
        assert_eq!(out.len(), 3);
        assert_eq!(get("AU"), vec![(50, 2)]);
        assert_eq!(get("ZZ"), vec![(50, 1)]);
        assert_eq!(get("ALL"), vec![(50, 3)]);
    }

    #[test]
    fn aggregate_matches_set_recount() {
        let db = load_geodb("0,1000,AA\n1001,2000,BB\n3000,3500,CC").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let snaps: Vec<CrawlSnapshot> = (0..3)
            .map(|i| CrawlSnapshot {
                timestamp: 100 * i,
                peers: (0..400).map(|_| rng.random_range(0..4000)).collect(),
            })
            .collect();
        let out = aggregate(&snaps, &db);
        for (i, snap) in snaps.iter().enumerate() {
            let distinct: BTreeSet<u32> = snap.peers.iter().copied().collect();
            let mut conserved = 0;
            for series in out.iter().filter(|s| s.entity != SYSTEM_ENTITY) {
                let expected = distinct
                    .iter()
                    .filter(|&&p| linear_lookup(&db, p) == series.entity)
                    .count() as u64;
                assert_eq!(series.points[i], (snap.timestamp, expected));
                conserved += expected;
            }
            let all = out.iter().find(|s| s.entity == SYSTEM_ENTITY).unwrap();
            assert_eq!(all.points[i].1, distinct.len() as u64);
            assert_eq!(conserved, distinct.len() as u64);
        }
    }

    #[test]
    fn series_csv_round_trip_and_ordering() {
        let s = CountSeries {
            entity: "AU".into(),
            points: vec![(1, 5), (2, 0), (9, 7)],
        };
        let text = series_to_csv(&s);
        assert_eq!(text, "AU,1,5\nAU,2,0\nAU,9,7\n");
        assert_eq!(series_from_csv(&text).unwrap(), vec![s]);
        assert!(series_from_csv("AU,5,1\nAU,5,2").is_err());
    }

    fn series(points: &[(i64, u64)]) -> CountSeries {
        CountSeries {
            entity: "XX".into(),
            points: points.to_vec(),
        }
    }

    #[test]
    fn resample_constant() {
        let w = resample(&series(&[(0, 10), (604800, 10)]), 0, 8).unwrap();
        assert_eq!(w.samples, vec![10.0; 8]);
    }

    #[test]
    fn resample_ramp_equals_grid_times() {
        let w = resample(&series(&[(0, 0), (604800, 604800)]), 0, 8).unwrap();
        for (i, v) in w.samples.iter().enumerate() {
            assert_eq!(*v, w.sample_time(i));
        }
    }

    #[test]
    fn resample_matches_two_point_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = -50_000;
        let mut pts = Vec::new();
        while t < WEEK_SECONDS + 50_000 {
            pts.push((t, rng.random_range(0..5000u64)));
            t += rng.random_range(1_000..90_000);
        }
        let s = series(&pts);
        let w = resample(&s, 0, 16).unwrap();
        for (i, &v) in w.samples.iter().enumerate() {
            let g = i as f64 * WEEK_SECONDS as f64 / 16.0;
            let j = pts.iter().rposition(|&(pt, _)| pt as f64 <= g).unwrap();
            let (ta, va) = pts[j];
            let (tb, vb) = pts[j + 1];
            let expected =
                va as f64 + (vb as f64 - va as f64) * (g - ta as f64) / (tb as f64 - ta as f64);
            assert!((v - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn resample_flat_extrapolation() {
        let w = resample(&series(&[(100_000, 4), (200_000, 8)]), 0, 4).unwrap();
        assert_eq!(w.samples[0], 4.0);
        assert_eq!(w.samples[3], 8.0);
    }

    #[test]
    fn resample_errors() {
        assert!(matches!(
            resample(&series(&[(0, 1)]), 0, 8),
            Err(Error::InsufficientData { usable: 1, .. })
        ));
        // Two points far outside on the same side give a single usable bracket.
        assert!(matches!(
            resample(&series(&[(-20, 1), (-10, 1)]), 0, 8),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            resample(&series(&[(0, 1), (10, 1)]), 0, 12),
            Err(Error::NotPowerOfTwo(12))
        ));
    }

    #[test]
    fn window_file_round_trip() {
        let w = EvolutionWindow::new("SYN", 604800, vec![1.5, 2.0, 0.0, 1e-3]).unwrap();
        let text = w.to_csv();
        assert!(looks_like_window(&text));
        assert!(!looks_like_window("AU,1,5\nAU,2,6\n"));
        assert!(!looks_like_window("AU,1,5\n"));
        assert_eq!(EvolutionWindow::from_csv(&text).unwrap(), w);
    }

    proptest! {
        #[test]
        fn resample_exact_on_affine(slope in -1000i64..1000, icept in 1_000_000i64..2_000_000,
                                    start in -100_000i64..100_000, log_len in 0u32..12) {
            let len = 1usize << log_len;
            // Knots every 100 000 s with an integral slope per knot keep the
            // counts on one exact line.
            let pts: Vec<(i64, u64)> = (-2..10)
                .map(|i| (i * 100_000, (icept + slope * i) as u64))
                .collect();
            let w = resample(&series(&pts), start, len).unwrap();
            prop_assert_eq!(w.len(), len);
            for (i, &v) in w.samples.iter().enumerate() {
                let g = w.sample_time(i);
                let line = icept as f64 + slope as f64 * g / 100_000.0;
                prop_assert!(v.is_finite());
                prop_assert!((v - line).abs() <= 1e-9 * line.abs());
            }
        }
    }
}
