//! Oriented N-partite graphs on the triangle `{(i, j) : i, j ≥ 1, i + j ≤ N + 1}`
//! and last passage times on them.
//!
//! Anti-diagonal `d = i + j - 1` runs from 1 (the origin) to N. A "right" step
//! increments `i`, an "up" step increments `j`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest Line / PointToPoint size accepted by [`enumerate_paths`].
pub const MAX_ENUM_LINE: usize = 12;
/// Largest Complete size accepted by [`enumerate_paths`].
pub const MAX_ENUM_COMPLETE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub i: usize,
    pub j: usize,
}

impl Site {
    pub const ORIGIN: Site = Site { i: 1, j: 1 };

    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    pub fn diagonal(self) -> usize {
        self.i + self.j - 1
    }

    pub fn up(self) -> Self {
        Self::new(self.i, self.j + 1)
    }

    pub fn right(self) -> Self {
        Self::new(self.i + 1, self.j)
    }

    pub fn transposed(self) -> Self {
        Self::new(self.j, self.i)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeKind {
    /// `C_N`: any vertex of one anti-diagonal connects to any of the next.
    Complete,
    /// `L_N`: up/right paths ending anywhere on anti-diagonal N.
    Line,
    /// `P_{N,M}`: up/right paths ending at `(N + 1 - M, M)`.
    PointToPoint { m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub n: usize,
}

impl LatticeSpec {
    pub fn complete(n: usize) -> Result<Self> {
        Self::new(LatticeKind::Complete, n)
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(LatticeKind::Line, n)
    }

    pub fn point(n: usize, m: usize) -> Result<Self> {
        Self::new(LatticeKind::PointToPoint { m }, n)
    }

    pub fn new(kind: LatticeKind, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(invalid("N", "must be at least 1"));
        }
        if let LatticeKind::PointToPoint { m } = kind {
            if m < 1 || m > n {
                return Err(invalid("M", format!("{m} is not in 1..={n}")));
            }
        }
        Ok(Self { kind, n })
    }

    /// Number of sites in the full triangle.
    pub fn triangle_size(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Column bounds `(max i, max j)` of the region paths may visit.
    pub fn bounds(&self) -> (usize, usize) {
        match self.kind {
            LatticeKind::PointToPoint { m } => (self.n + 1 - m, m),
            _ => (self.n, self.n),
        }
    }

    /// Terminal vertex for point-to-point lattices.
    pub fn terminal(&self) -> Option<Site> {
        match self.kind {
            LatticeKind::PointToPoint { m } => Some(Site::new(self.n + 1 - m, m)),
            _ => None,
        }
    }

    /// Vertices of anti-diagonal `d` inside the lattice's region, by increasing `i`.
    pub fn section(&self, d: usize) -> Vec<Site> {
        let (max_i, max_j) = self.bounds();
        (1..=d)
            .map(|i| Site::new(i, d + 1 - i))
            .filter(|s| s.i <= max_i && s.j <= max_j)
            .collect()
    }

    pub fn contains(&self, s: Site) -> bool {
        let (max_i, max_j) = self.bounds();
        s.i >= 1 && s.j >= 1 && s.diagonal() <= self.n && s.i <= max_i && s.j <= max_j
    }

    /// The same lattice with `i` and `j` exchanged.
    pub fn transposed(&self) -> Self {
        match self.kind {
            LatticeKind::PointToPoint { m } => Self {
                kind: LatticeKind::PointToPoint { m: self.n + 1 - m },
                n: self.n,
            },
            _ => *self,
        }
    }
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LatticeKind::Complete => write!(f, "complete:{}", self.n),
            LatticeKind::Line => write!(f, "line:{}", self.n),
            LatticeKind::PointToPoint { m } => write!(f, "point:{}:{}", self.n, m),
        }
    }
}

impl FromStr for LatticeSpec {
    type Err = Error;

    /// `line:N`, `complete:N` or `point:N:M`.
    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| Error::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |t: &str| t.parse::<usize>().map_err(|_| err("expected an integer"));
        match parts.as_slice() {
            ["line", n] => LatticeSpec::line(num(n)?),
            ["complete", n] => LatticeSpec::complete(num(n)?),
            ["point", n, m] => LatticeSpec::point(num(n)?, num(m)?),
            _ => Err(err("expected line:N, complete:N or point:N:M")),
        }
    }
}

/// Site weights on the triangle, stored row-major: row `i` holds
/// `j = 1..=N+1-i`, and starts at offset `(i-1)(N+1) - (i-1)i/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    n: usize,
    data: Vec<f64>,
}

impl WeightField {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, 0.0)
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self {
            n,
            data: vec![value; n * (n + 1) / 2],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(Site) -> f64) -> Self {
        let mut w = Self::zeros(n);
        for s in w.sites().collect::<Vec<_>>() {
            w.set(s, f(s));
        }
        w
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn index(&self, s: Site) -> usize {
        debug_assert!(s.i >= 1 && s.j >= 1 && s.diagonal() <= self.n, "site {s} off the triangle");
        let r = s.i - 1;
        r * (self.n + 1) - r * (r + 1) / 2 + (s.j - 1)
    }

    #[inline]
    pub fn get(&self, s: Site) -> f64 {
        self.data[self.index(s)]
    }

    #[inline]
    pub fn set(&mut self, s: Site, value: f64) {
        let k = self.index(s);
        self.data[k] = value;
    }

    /// All sites, row-major.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        let n = self.n;
        (1..=n).flat_map(move |i| (1..=n + 1 - i).map(move |j| Site::new(i, j)))
    }

    pub fn transposed(&self) -> Self {
        Self::from_fn(self.n, |s| self.get(s.transposed()))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&w| w >= 0.0)
    }

    /// CSV with header `i,j,w`, one row per site.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["i", "j", "w"])?;
        for s in self.sites() {
            wtr.write_record([s.i.to_string(), s.j.to_string(), self.get(s).to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            let (i, j, w): (usize, usize, f64) = rec?;
            rows.push((Site::new(i, j), w));
        }
        let n = rows.iter().map(|(s, _)| s.diagonal()).max().unwrap_or(0);
        if rows.len() != n * (n + 1) / 2 || rows.iter().any(|(s, _)| s.i == 0 || s.j == 0) {
            return Err(invalid("field", "rows do not cover a triangle exactly once"));
        }
        let mut field = Self::filled(n, f64::NAN);
        for (s, w) in rows {
            field.set(s, w);
        }
        if field.data.iter().any(|w| w.is_nan()) {
            return Err(invalid("field", "duplicate sites"));
        }
        Ok(field)
    }
}

/// A path `v_1 = (1,1), ..., v_N` with `v_d` on anti-diagonal `d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePath {
    vertices: Vec<Site>,
}

impl LatticePath {
    pub fn new(vertices: Vec<Site>) -> Result<Self> {
        if vertices.first() != Some(&Site::ORIGIN) {
            return Err(invalid("path", "must start at (1,1)"));
        }
        if vertices.iter().enumerate().any(|(k, s)| s.diagonal() != k + 1) {
            return Err(invalid("path", "vertex d must lie on anti-diagonal d"));
        }
        Ok(Self { vertices })
    }

    /// Walks from the origin through the given steps (`true` = up).
    pub fn from_steps(steps: impl IntoIterator<Item = bool>) -> Self {
        let mut v = vec![Site::ORIGIN];
        for up in steps {
            let last = *v.last().unwrap();
            v.push(if up { last.up() } else { last.right() });
        }
        Self { vertices: v }
    }

    pub fn vertices(&self) -> &[Site] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// The vertex on anti-diagonal `d` (1-based).
    pub fn at(&self, d: usize) -> Site {
        self.vertices[d - 1]
    }

    pub fn terminal(&self) -> Site {
        *self.vertices.last().unwrap()
    }

    pub fn is_up_right(&self) -> bool {
        self.vertices
            .iter()
            .tuple_windows()
            .all(|(a, b)| *b == a.up() || *b == a.right())
    }

    pub fn weight(&self, w: &WeightField) -> f64 {
        self.vertices.iter().map(|&s| w.get(s)).sum()
    }

    pub fn transposed(&self) -> Self {
        Self {
            vertices: self.vertices.iter().map(|s| s.transposed()).collect(),
        }
    }

    /// Whether the path is admissible on `spec`.
    pub fn is_valid_for(&self, spec: &LatticeSpec) -> bool {
        if self.vertices.len() != spec.n || !self.vertices.iter().all(|&s| spec.contains(s)) {
            return false;
        }
        match spec.kind {
            LatticeKind::Complete => true,
            LatticeKind::Line => self.is_up_right(),
            LatticeKind::PointToPoint { .. } => {
                self.is_up_right() && Some(self.terminal()) == spec.terminal()
            }
        }
    }
}

impl fmt::Display for LatticePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.vertices.iter().join("-"))
    }
}

// Forward DP table of best path weights from the origin inside the `max_i` by
// `max_j` box, stored in the field's own layout.
fn up_right_table(w: &WeightField, max_i: usize, max_j: usize) -> Vec<f64> {
    let n = w.n();
    let mut best = vec![f64::NEG_INFINITY; w.as_slice().len()];
    for i in 1..=max_i.min(n) {
        for j in 1..=(n + 1 - i).min(max_j) {
            let s = Site::new(i, j);
            let from_left = if i > 1 { best[w.index(Site::new(i - 1, j))] } else { f64::NEG_INFINITY };
            let from_below = if j > 1 { best[w.index(Site::new(i, j - 1))] } else { f64::NEG_INFINITY };
            let prev = from_left.max(from_below);
            let prev = if prev == f64::NEG_INFINITY { 0.0 } else { prev };
            best[w.index(s)] = w.get(s) + prev;
        }
    }
    best
}

/// Point-to-line time `R_N`: best up/right path ending on anti-diagonal N.
pub fn lpp_line(w: &WeightField) -> f64 {
    let n = w.n();
    let best = up_right_table(w, n, n);
    (1..=n)
        .map(|i| best[w.index(Site::new(i, n + 1 - i))])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Point-to-point time: best up/right path from `(1,1)` to `(N+1-M, M)`.
pub fn lpp_point(w: &WeightField, m: usize) -> Result<f64> {
    let n = w.n();
    if m < 1 || m > n {
        return Err(invalid("M", format!("{m} is not in 1..={n}")));
    }
    let best = up_right_table(w, n + 1 - m, m);
    Ok(best[w.index(Site::new(n + 1 - m, m))])
}

/// Time on `C_N`: the sum of anti-diagonal maxima.
pub fn lpp_complete(w: &WeightField) -> f64 {
    let n = w.n();
    let mut max = vec![f64::NEG_INFINITY; n];
    for s in w.sites() {
        let d = s.diagonal() - 1;
        max[d] = max[d].max(w.get(s));
    }
    max.iter().sum()
}

/// Time on the complete graph restricted to the `P_{N,M}` rectangle: the sum
/// of the maxima over each anti-diagonal's section.
pub fn lpp_point_complete(w: &WeightField, m: usize) -> Result<f64> {
    let spec = LatticeSpec::point(w.n(), m)?;
    Ok((1..=w.n())
        .map(|d| {
            spec.section(d)
                .into_iter()
                .map(|s| w.get(s))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum())
}

/// LPP time of `w` on the graph described by `spec`.
pub fn lpp(spec: &LatticeSpec, w: &WeightField) -> f64 {
    match spec.kind {
        LatticeKind::Complete => lpp_complete(w),
        LatticeKind::Line => lpp_line(w),
        LatticeKind::PointToPoint { m } => lpp_point(w, m).expect("spec validated M"),
    }
}

/// Every admissible path exactly once. Capped at `N ≤ 12` (up/right) and
/// `N ≤ 8` (complete).
pub fn enumerate_paths(spec: &LatticeSpec) -> Result<Vec<LatticePath>> {
    let n = spec.n;
    match spec.kind {
        LatticeKind::Complete => {
            if n > MAX_ENUM_COMPLETE {
                return Err(invalid("N", format!("complete enumeration is capped at {MAX_ENUM_COMPLETE}")));
            }
            Ok((1..=n)
                .map(|d| (1..=d).map(move |i| Site::new(i, d + 1 - i)))
                .multi_cartesian_product()
                .map(|vertices| LatticePath { vertices })
                .collect())
        }
        LatticeKind::Line => {
            if n > MAX_ENUM_LINE {
                return Err(invalid("N", format!("up/right enumeration is capped at {MAX_ENUM_LINE}")));
            }
            Ok((0u32..1 << (n - 1))
                .map(|bits| LatticePath::from_steps((0..n - 1).map(|k| bits >> k & 1 == 1)))
                .collect())
        }
        LatticeKind::PointToPoint { m } => {
            if n > MAX_ENUM_LINE {
                return Err(invalid("N", format!("up/right enumeration is capped at {MAX_ENUM_LINE}")));
            }
            // choose which of the N-1 steps are the M-1 "up" steps
            Ok((0..n - 1)
                .combinations(m - 1)
                .map(|ups| LatticePath::from_steps((0..n - 1).map(|k| ups.contains(&k))))
                .collect())
        }
    }
}

/// A maximizing path. Ties prefer the "up" predecessor while backtracking; a
/// tie among terminals (or among sites of a complete-graph anti-diagonal) goes
/// to the lexicographically smallest site.
pub fn geodesic(spec: &LatticeSpec, w: &WeightField) -> LatticePath {
    let n = spec.n;
    if spec.kind == LatticeKind::Complete {
        let vertices = (1..=n)
            .map(|d| {
                let mut best = Site::new(1, d);
                for i in 2..=d {
                    let s = Site::new(i, d + 1 - i);
                    if w.get(s) > w.get(best) {
                        best = s;
                    }
                }
                best
            })
            .collect();
        return LatticePath { vertices };
    }
    let (max_i, max_j) = spec.bounds();
    let best = up_right_table(w, max_i, max_j);
    let value = |s: Site| best[w.index(s)];
    let mut cur = match spec.terminal() {
        Some(t) => t,
        None => {
            let mut t = Site::new(1, n);
            for i in 2..=n {
                let s = Site::new(i, n + 1 - i);
                if value(s) > value(t) {
                    t = s;
                }
            }
            t
        }
    };
    let mut rev = vec![cur];
    while cur != Site::ORIGIN {
        let below = (cur.j > 1).then(|| Site::new(cur.i, cur.j - 1));
        let left = (cur.i > 1).then(|| Site::new(cur.i - 1, cur.j));
        cur = match (below, left) {
            (Some(b), Some(l)) => {
                if value(l) > value(b) {
                    l
                } else {
                    b
                }
            }
            (Some(b), None) => b,
            (None, Some(l)) => l,
            (None, None) => unreachable!(),
        };
        rev.push(cur);
    }
    rev.reverse();
    LatticePath { vertices: rev }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_field() -> WeightField {
        let mut w = WeightField::zeros(2);
        w.set(Site::new(1, 1), 1.0);
        w.set(Site::new(1, 2), 2.0);
        w.set(Site::new(2, 1), 3.0);
        w
    }

    fn random_field(n: usize, rng: &mut impl Rng) -> WeightField {
        WeightField::from_fn(n, |_| rng.random::<f64>())
    }

    fn brute(spec: &LatticeSpec, w: &WeightField) -> f64 {
        enumerate_paths(spec)
            .unwrap()
            .iter()
            .map(|p| p.weight(w))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn index_layout_is_dense() {
        let w = WeightField::zeros(5);
        let idx: Vec<usize> = w.sites().map(|s| w.index(s)).collect();
        assert_eq!(idx, (0..15).collect::<Vec<_>>());
    }

    #[test]
    fn small_examples() {
        let w = small_field();
        assert_eq!(lpp_line(&w), 4.0);
        assert_eq!(lpp_complete(&w), 4.0);
        let one = WeightField::filled(1, 2.5);
        assert_eq!(lpp_line(&one), 2.5);
        assert_eq!(lpp_complete(&WeightField::filled(7, 1.5)), 7.0 * 1.5);
        let g = geodesic(&LatticeSpec::line(2).unwrap(), &w);
        assert_eq!(g.vertices(), &[Site::new(1, 1), Site::new(2, 1)]);
    }

    #[test]
    fn point_edges_are_single_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_field(6, &mut rng);
        let column: f64 = (1..=6).map(|i| w.get(Site::new(i, 1))).sum();
        let row: f64 = (1..=6).map(|j| w.get(Site::new(1, j))).sum();
        assert!((lpp_point(&w, 1).unwrap() - column).abs() < 1e-12);
        assert!((lpp_point(&w, 6).unwrap() - row).abs() < 1e-12);
        assert!(lpp_point(&w, 0).is_err());
        assert!(lpp_point(&w, 7).is_err());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_paths(&LatticeSpec::line(3).unwrap()).unwrap().len(), 4);
        assert_eq!(enumerate_paths(&LatticeSpec::point(3, 2).unwrap()).unwrap().len(), 2);
        assert_eq!(enumerate_paths(&LatticeSpec::complete(3).unwrap()).unwrap().len(), 6);
        assert_eq!(enumerate_paths(&LatticeSpec::complete(6).unwrap()).unwrap().len(), 720);
        assert_eq!(enumerate_paths(&LatticeSpec::point(4, 2).unwrap()).unwrap().len(), 3);
        assert!(enumerate_paths(&LatticeSpec::line(13).unwrap()).is_err());
        assert!(enumerate_paths(&LatticeSpec::complete(9).unwrap()).is_err());
        for spec in [
            LatticeSpec::line(6).unwrap(),
            LatticeSpec::point(6, 4).unwrap(),
            LatticeSpec::complete(4).unwrap(),
        ] {
            let paths = enumerate_paths(&spec).unwrap();
            assert!(paths.iter().all(|p| p.is_valid_for(&spec)));
            assert_eq!(paths.iter().unique().count(), paths.len());
        }
    }

    #[test]
    fn dp_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let w = random_field(5, &mut rng);
            assert_eq!(lpp_line(&w), brute(&LatticeSpec::line(5).unwrap(), &w));
            let w4 = random_field(4, &mut rng);
            assert_eq!(lpp_point(&w4, 2).unwrap(), brute(&LatticeSpec::point(4, 2).unwrap(), &w4));
            let w6 = random_field(6, &mut rng);
            assert_eq!(lpp_complete(&w6), brute(&LatticeSpec::complete(6).unwrap(), &w6));
        }
    }

    #[test]
    fn constant_field_geodesic_is_all_up() {
        let w = WeightField::filled(5, 1.0);
        let all_up = LatticePath::from_steps([true; 4]);
        assert_eq!(geodesic(&LatticeSpec::line(5).unwrap(), &w), all_up);
        assert_eq!(geodesic(&LatticeSpec::complete(5).unwrap(), &w), all_up);
        let p = geodesic(&LatticeSpec::point(5, 2).unwrap(), &w);
        assert!(p.is_valid_for(&LatticeSpec::point(5, 2).unwrap()));
    }

    #[test]
    fn geodesic_attains_lpp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let w = random_field(7, &mut rng);
            for spec in [
                LatticeSpec::line(7).unwrap(),
                LatticeSpec::complete(7).unwrap(),
                LatticeSpec::point(7, 3).unwrap(),
            ] {
                let g = geodesic(&spec, &w);
                assert!(g.is_valid_for(&spec));
                assert_eq!(g.weight(&w), lpp(&spec, &w));
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_field(4, &mut rng);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("i,j,w\n"));
        assert_eq!(WeightField::read_csv(&buf[..]).unwrap(), w);
        assert!(WeightField::read_csv(&b"i,j,w\n1,1,0.5\n1,2,0.5\n"[..]).is_err());
    }

    #[test]
    fn parse_lattices() {
        assert_eq!("line:8".parse::<LatticeSpec>().unwrap(), LatticeSpec::line(8).unwrap());
        assert_eq!("point:9:3".parse::<LatticeSpec>().unwrap().terminal(), Some(Site::new(7, 3)));
        assert!("point:3:4".parse::<LatticeSpec>().is_err());
        assert!("ring:3".parse::<LatticeSpec>().is_err());
        assert!("line:0".parse::<LatticeSpec>().is_err());
    }

    #[test]
    fn sections() {
        let p = LatticeSpec::point(6, 4).unwrap();
        let lens: Vec<usize> = (1..=6).map(|d| p.section(d).len()).collect();
        assert_eq!(lens, vec![1, 2, 3, 3, 2, 1]);
        let c = LatticeSpec::complete(4).unwrap();
        assert_eq!(c.section(4).len(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn field(n: usize) -> impl Strategy<Value = WeightField> {
            proptest::collection::vec(0.0f64..10.0, n * (n + 1) / 2)
                .prop_map(move |data| WeightField { n, data })
        }

        proptest! {
            #[test]
            fn orderings_between_graphs(w in (1usize..9).prop_flat_map(field), m_frac in 0.0f64..1.0) {
                let n = w.n();
                let m = 1 + ((n - 1) as f64 * m_frac).round() as usize;
                prop_assert!(lpp_line(&w) <= lpp_complete(&w));
                prop_assert!(lpp_point(&w, m).unwrap() <= lpp_line(&w));
            }

            #[test]
            fn transpose_symmetry(w in (1usize..9).prop_flat_map(field), m_frac in 0.0f64..1.0) {
                let n = w.n();
                let m = 1 + ((n - 1) as f64 * m_frac).round() as usize;
                let t = w.transposed();
                prop_assert_eq!(lpp_line(&t), lpp_line(&w));
                prop_assert_eq!(lpp_point(&t, n + 1 - m).unwrap(), lpp_point(&w, m).unwrap());
            }
        }
    }
}
