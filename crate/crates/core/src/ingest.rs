//! Georeferenced point predictions: parsing, validation and survey geometry.
//!
//! The point-CSV header is `session_id,seq,x,y,prob_<Class0>,...` with one
//! row per underwater image. A `lat,lon` pair may replace `x,y`; those rows
//! are projected onto a local tangent plane. Columns that do not belong to
//! the catalog are ignored, so a classifier with a larger label set can feed
//! the pipeline directly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean Earth radius used by the local projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PointPrediction<T: Scalar> {
    pub session_id: String,
    pub seq: u64,
    pub x: T,
    pub y: T,
    /// One probability per catalog class. Multi-label, so no sum constraint.
    pub probs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointPredictionSet<T: Scalar> {
    pub catalog: ClassCatalog,
    /// Sessions keyed by id; points ordered by strictly increasing `seq`.
    pub sessions: BTreeMap<String, Vec<PointPrediction<T>>>,
}

impl<T: Scalar> PointPredictionSet<T> {
    pub fn empty(catalog: ClassCatalog) -> Self {
        PointPredictionSet { catalog, sessions: BTreeMap::new() }
    }

    /// Groups points by session and sorts each session by `seq`.
    pub fn from_points(catalog: ClassCatalog, points: Vec<PointPrediction<T>>) -> Result<Self> {
        let mut sessions: BTreeMap<String, Vec<PointPrediction<T>>> = BTreeMap::new();
        for (i, p) in points.into_iter().enumerate() {
            if p.probs.len() != catalog.len() {
                return Err(Error::LengthMismatch { expected: catalog.len(), got: p.probs.len() });
            }
            if let Some(c) = p.probs.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
                return Err(Error::ProbabilityOutOfRange {
                    line: i + 1,
                    class: catalog.name(c).unwrap_or_default().to_string(),
                });
            }
            sessions.entry(p.session_id.clone()).or_default().push(p);
        }
        for (id, pts) in sessions.iter_mut() {
            pts.sort_by_key(|p| p.seq);
            if let Some(w) = pts.windows(2).position(|w| w[0].seq == w[1].seq) {
                return Err(Error::NonIncreasingSeq { session: id.clone(), line: w + 2 });
            }
        }
        Ok(PointPredictionSet { catalog, sessions })
    }

    pub fn len(&self) -> usize {
        self.sessions.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points in `(session_id, seq)` order.
    pub fn iter(&self) -> impl Iterator<Item = &PointPrediction<T>> {
        self.sessions.values().flatten()
    }

    /// `(min_x, min_y, max_x, max_y)` over all points.
    pub fn bounds(&self) -> Option<(T, T, T, T)> {
        let mut it = self.iter();
        let first = it.next()?;
        Some(it.fold((first.x, first.y, first.x, first.y), |(a, b, c, d), p| {
            (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y))
        }))
    }
}

fn class_column(name: &str) -> String {
    format!("prob_{name}")
}

/// Parses a point-CSV document.
///
/// `origin` is only used for `lat,lon` input; when absent the first point of
/// the lexically first session is the projection origin.
pub fn parse_point_predictions<T: Scalar, R: Read>(
    input: R,
    catalog: &ClassCatalog,
    origin: Option<(f64, f64)>,
) -> Result<PointPredictionSet<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).flexible(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyFile);
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let session_col = col("session_id").ok_or_else(|| Error::MissingClassColumn("session_id".into()))?;
    let seq_col = col("seq").ok_or_else(|| Error::MissingClassColumn("seq".into()))?;
    let (a_col, b_col, geographic) = match (col("x"), col("y"), col("lat"), col("lon")) {
        (Some(x), Some(y), _, _) => (x, y, false),
        (_, _, Some(lat), Some(lon)) => (lat, lon, true),
        _ => return Err(Error::MissingClassColumn("x,y or lat,lon".into())),
    };
    let prob_cols = catalog
        .classes()
        .iter()
        .map(|c| col(&class_column(&c.name)).ok_or_else(|| Error::MissingClassColumn(class_column(&c.name))))
        .collect::<Result<Vec<_>>>()?;

    struct Row {
        line: usize,
        session: String,
        seq: u64,
        a: f64,
        b: f64,
        probs: Vec<f64>,
    }

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
        if rec.len() != headers.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let num = |idx: usize, what: &str| -> Result<f64> {
            let s = &rec[idx];
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedRow { line, reason: format!("bad {what} `{s}`") })
        };
        let session = rec[session_col].to_string();
        if session.is_empty() {
            return Err(Error::MalformedRow { line, reason: "empty session_id".into() });
        }
        let seq = rec[seq_col]
            .parse::<u64>()
            .map_err(|_| Error::MalformedRow { line, reason: format!("bad seq `{}`", &rec[seq_col]) })?;
        let a = num(a_col, if geographic { "lat" } else { "x" })?;
        let b = num(b_col, if geographic { "lon" } else { "y" })?;
        let mut probs = Vec::with_capacity(prob_cols.len());
        for (c, &pc) in prob_cols.iter().enumerate() {
            let p = num(pc, "probability")?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange {
                    line,
                    class: catalog.name(c).unwrap_or_default().to_string(),
                });
            }
            probs.push(p);
        }
        rows.push(Row { line, session, seq, a, b, probs });
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }

    let coords: Vec<(f64, f64)> = if geographic {
        let origin = match origin {
            Some(o) => o,
            None => {
                let first =
                    rows.iter().min_by(|p, q| p.session.cmp(&q.session).then(p.seq.cmp(&q.seq))).expect("non-empty");
                (first.a, first.b)
            }
        };
        let ll: Vec<(f64, f64)> = rows.iter().map(|r| (r.a, r.b)).collect();
        latlon_to_local::<f64>(&ll, origin)?
    } else {
        rows.iter().map(|r| (r.a, r.b)).collect()
    };

    let mut sessions: BTreeMap<String, Vec<(usize, PointPrediction<T>)>> = BTreeMap::new();
    for (r, (x, y)) in rows.into_iter().zip(coords) {
        let p = PointPrediction {
            session_id: r.session.clone(),
            seq: r.seq,
            x: T::from_f64_lossy(x),
            y: T::from_f64_lossy(y),
            probs: r.probs.into_iter().map(T::from_f64_lossy).collect(),
        };
        sessions.entry(r.session).or_default().push((r.line, p));
    }
    let mut out = BTreeMap::new();
    for (id, mut pts) in sessions {
        pts.sort_by_key(|(_, p)| p.seq);
        if let Some(w) = pts.windows(2).find(|w| w[0].1.seq == w[1].1.seq) {
            return Err(Error::NonIncreasingSeq { session: id, line: w[1].0.max(w[0].0) });
        }
        out.insert(id, pts.into_iter().map(|(_, p)| p).collect());
    }
    Ok(PointPredictionSet { catalog: catalog.clone(), sessions: out })
}

/// Writes the `x,y` form of the point-CSV format.
pub fn write_point_predictions<T: Scalar, W: Write>(set: &PointPredictionSet<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["session_id".to_string(), "seq".into(), "x".into(), "y".into()];
    header.extend(set.catalog.classes().iter().map(|c| class_column(&c.name)));
    w.write_record(&header)?;
    for p in set.iter() {
        let mut rec = vec![p.session_id.clone(), p.seq.to_string(), p.x.to_string(), p.y.to_string()];
        rec.extend(p.probs.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Euclidean distances between consecutive points of one session.
pub fn consecutive_distances<T: Scalar>(session: &[PointPrediction<T>]) -> Vec<T> {
    session.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).collect()
}

/// Median of a non-empty list; even counts average the central pair.
pub(crate) fn median<T: Scalar>(mut v: Vec<T>) -> Option<T> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / T::from_f64_lossy(2.0) })
}

/// Median distance between consecutive acquisitions of one session.
pub fn median_consecutive_spacing<T: Scalar>(session: &[PointPrediction<T>]) -> Result<T> {
    if session.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: session.len() });
    }
    Ok(median(consecutive_distances(session)).expect("at least one distance"))
}

/// Median over the consecutive distances of every session, pooled.
pub fn survey_spacing<T: Scalar>(set: &PointPredictionSet<T>) -> Result<T> {
    let d: Vec<T> = set.sessions.values().flat_map(|s| consecutive_distances(s)).collect();
    let got = d.len();
    median(d).ok_or(Error::TooFewPoints { needed: 2, got })
}

/// Equirectangular projection onto the tangent plane at `origin` (degrees).
pub fn latlon_to_local<T: Scalar>(points: &[(f64, f64)], origin: (f64, f64)) -> Result<Vec<(T, T)>> {
    let check = |(lat, lon): (f64, f64)| {
        if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
            Ok(())
        } else {
            Err(Error::OutOfRangeCoordinate { lat, lon })
        }
    };
    check(origin)?;
    let (lat0, lon0) = (origin.0.to_radians(), origin.1.to_radians());
    let cos0 = lat0.cos();
    points
        .iter()
        .map(|&(lat, lon)| {
            check((lat, lon))?;
            let x = EARTH_RADIUS_M * (lon.to_radians() - lon0) * cos0;
            let y = EARTH_RADIUS_M * (lat.to_radians() - lat0);
            Ok((T::from_f64_lossy(x), T::from_f64_lossy(y)))
        })
        .collect()
}

/// One class's probabilities over all sessions, in `(session_id, seq)` order.
pub fn pool_class_values<T: Scalar>(set: &PointPredictionSet<T>, class_id: usize) -> Result<Vec<T>> {
    set.catalog.check_class(class_id)?;
    Ok(set.iter().map(|p| p.probs[class_id]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three() -> ClassCatalog {
        ClassCatalog::from_names(&["Sand", "A", "B"]).unwrap()
    }

    fn pt(session: &str, seq: u64, x: f64, y: f64, probs: &[f64]) -> PointPrediction<f64> {
        PointPrediction { session_id: session.into(), seq, x, y, probs: probs.to_vec() }
    }

    #[test]
    fn parses_two_rows() {
        let csv = "session_id,seq,x,y,prob_Sand,prob_A,prob_B\n\
                   s1,0,1.0,2.0,0.6,0.4,0.0\n\
                   s1,1,1.3,2.0,0.1,0.9,0.2\n";
        let set: PointPredictionSet<f64> = parse_point_predictions(csv.as_bytes(), &three(), None).unwrap();
        assert_eq!(set.sessions.len(), 1);
        assert_eq!(set.len(), 2);
        assert_eq!(set.sessions["s1"][1].probs, vec![0.1, 0.9, 0.2]);
    }

    #[test]
    fn sorts_by_seq_and_ignores_extra_columns() {
        let csv = "session_id,seq,x,y,prob_Other,prob_Sand,prob_A,prob_B\n\
                   s2,5,0,0,0.5,0.1,0.1,0.1\n\
                   s1,3,0,0,0.5,0.2,0.2,0.2\n\
                   s1,1,0,0,0.5,0.3,0.3,0.3\n";
        let set: PointPredictionSet<f64> = parse_point_predictions(csv.as_bytes(), &three(), None).unwrap();
        let seqs: Vec<u64> = set.iter().map(|p| p.seq).collect();
        assert_eq!(seqs, vec![1, 3, 5]);
        assert_eq!(set.sessions["s1"][0].probs, vec![0.3, 0.3, 0.3]);
    }

    #[test]
    fn parse_errors() {
        let cat = three();
        let out_of_range = "session_id,seq,x,y,prob_Sand,prob_A,prob_B\ns,0,0,0,1.3,0,0\n";
        assert!(matches!(
            parse_point_predictions::<f64, _>(out_of_range.as_bytes(), &cat, None),
            Err(Error::ProbabilityOutOfRange { line: 2, ref class }) if class == "Sand"
        ));
        let missing = "session_id,seq,x,y,prob_A,prob_B\ns,0,0,0,0,0\n";
        assert!(matches!(
            parse_point_predictions::<f64, _>(missing.as_bytes(), &cat, None),
            Err(Error::MissingClassColumn(ref c)) if c == "prob_Sand"
        ));
        assert!(matches!(parse_point_predictions::<f64, _>("".as_bytes(), &cat, None), Err(Error::EmptyFile)));
        let header_only = "session_id,seq,x,y,prob_Sand,prob_A,prob_B\n";
        assert!(matches!(parse_point_predictions::<f64, _>(header_only.as_bytes(), &cat, None), Err(Error::EmptyFile)));
        let bad_num = "session_id,seq,x,y,prob_Sand,prob_A,prob_B\ns,0,abc,0,0,0,0\n";
        assert!(matches!(
            parse_point_predictions::<f64, _>(bad_num.as_bytes(), &cat, None),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let short = "session_id,seq,x,y,prob_Sand,prob_A,prob_B\ns,0,0,0,0\n";
        assert!(matches!(
            parse_point_predictions::<f64, _>(short.as_bytes(), &cat, None),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let dup = "session_id,seq,x,y,prob_Sand,prob_A,prob_B\ns,0,0,0,0,0,0\ns,0,1,0,0,0,0\n";
        assert!(matches!(
            parse_point_predictions::<f64, _>(dup.as_bytes(), &cat, None),
            Err(Error::NonIncreasingSeq { .. })
        ));
    }

    #[test]
    fn latlon_variant_uses_first_point_as_origin() {
        let csv = "session_id,seq,lat,lon,prob_Sand,prob_A,prob_B\n\
                   b,0,-21.0,55.0,0,0,0\n\
                   a,1,-21.0001,55.0,0,0,0\n\
                   a,0,-21.0,55.0,0,0,0\n";
        let set: PointPredictionSet<f64> = parse_point_predictions(csv.as_bytes(), &three(), None).unwrap();
        let a = &set.sessions["a"];
        assert_eq!((a[0].x, a[0].y), (0.0, 0.0));
        assert!((a[1].y + 11.119_49).abs() < 1e-3);
    }

    #[test]
    fn spacing_medians() {
        // consecutive distances 1, 2, 4
        let s = vec![
            pt("s", 0, 0.0, 0.0, &[0.0]),
            pt("s", 1, 1.0, 0.0, &[0.0]),
            pt("s", 2, 3.0, 0.0, &[0.0]),
            pt("s", 3, 7.0, 0.0, &[0.0]),
        ];
        assert_eq!(median_consecutive_spacing(&s).unwrap(), 2.0);
        // distances 1, 3
        let s = vec![pt("s", 0, 0.0, 0.0, &[0.0]), pt("s", 1, 0.0, 1.0, &[0.0]), pt("s", 2, 0.0, 4.0, &[0.0])];
        assert_eq!(median_consecutive_spacing(&s).unwrap(), 2.0);
        assert!(matches!(median_consecutive_spacing(&s[..1]), Err(Error::TooFewPoints { needed: 2, got: 1 })));
    }

    #[test]
    fn survey_regime_spacing_accepted() {
        // ASV transects with 0.30..0.35 m between images
        let s: Vec<_> =
            (0..20).map(|i| pt("s", i, i as f64 * 0.3 + if i % 2 == 0 { 0.0 } else { 0.05 }, 0.0, &[0.0])).collect();
        let d = median_consecutive_spacing(&s).unwrap();
        assert!((0.25..=0.35).contains(&d), "{d}");
    }

    #[test]
    fn latlon_projection() {
        let o = (-21.1, 55.2);
        let v: Vec<(f64, f64)> = latlon_to_local(&[o, (o.0 + 0.0001, o.1)], o).unwrap();
        assert_eq!(v[0], (0.0, 0.0));
        // R * 0.0001° in radians = 6371000 * 1.745329e-6 = 11.1195 m
        assert!((v[1].1 - 11.119_49).abs() < 1e-3, "{}", v[1].1);
        assert_eq!(v[1].0, 0.0);
        assert!(matches!(latlon_to_local::<f64>(&[(91.0, 0.0)], (0.0, 0.0)), Err(Error::OutOfRangeCoordinate { .. })));
    }

    #[test]
    fn pooling() {
        let cat = ClassCatalog::from_names(&["c"]).unwrap();
        let set = PointPredictionSet::from_points(
            cat.clone(),
            vec![pt("b", 0, 0.0, 0.0, &[0.3]), pt("a", 1, 0.0, 0.0, &[0.2]), pt("a", 0, 0.0, 0.0, &[0.1])],
        )
        .unwrap();
        assert_eq!(pool_class_values(&set, 0).unwrap(), vec![0.1, 0.2, 0.3]);
        assert!(matches!(pool_class_values(&set, 1), Err(Error::UnknownClass(1))));
        let empty = PointPredictionSet::<f64>::empty(cat);
        assert!(pool_class_values(&empty, 0).unwrap().is_empty());
    }

    #[test]
    fn write_then_parse() {
        let cat = three();
        let set = PointPredictionSet::from_points(
            cat.clone(),
            vec![pt("s", 0, 1.5, -2.25, &[0.1, 0.2, 0.3]), pt("s", 1, 2.0, -2.0, &[1.0, 0.0, 0.5])],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_point_predictions(&set, &mut buf).unwrap();
        let back: PointPredictionSet<f64> = parse_point_predictions(&buf[..], &cat, None).unwrap();
        assert_eq!(back, set);
    }

    proptest! {
        #[test]
        fn spacing_translation_invariant(
            pts in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..40),
            dx in -1e4f64..1e4, dy in -1e4f64..1e4,
        ) {
            let a: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| pt("s", i as u64, x, y, &[0.0])).collect();
            let b: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| pt("s", i as u64, x + dx, y + dy, &[0.0])).collect();
            let da = median_consecutive_spacing(&a).unwrap();
            let db = median_consecutive_spacing(&b).unwrap();
            prop_assert!((da - db).abs() <= 1e-9 * (1.0 + dx.abs() + dy.abs()));
        }

        #[test]
        fn pool_length_equals_point_count(sizes in proptest::collection::vec(0usize..10, 1..5)) {
            let cat = ClassCatalog::from_names(&["c"]).unwrap();
            let mut pts = Vec::new();
            for (s, &n) in sizes.iter().enumerate() {
                for i in 0..n {
                    pts.push(pt(&format!("s{s}"), i as u64, 0.0, 0.0, &[0.5]));
                }
            }
            let set = PointPredictionSet::from_points(cat, pts).unwrap();
            prop_assert_eq!(pool_class_values(&set, 0).unwrap().len(), sizes.iter().sum::<usize>());
        }
    }
}
