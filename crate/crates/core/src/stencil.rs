//! Stencil generators: the redistribution rates `δ_v` of one layer's
//! off-diagonal capacity flow, normalized so that `Σ_v δ_v = 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, RngSpec};

/// Lattice offset. 1D offsets keep the second component at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Offset(pub [i64; 2]);

impl Offset {
    pub fn d1(v: i64) -> Self {
        Offset([v, 0])
    }

    pub fn d2(v0: i64, v1: i64) -> Self {
        Offset([v0, v1])
    }

    pub fn scaled(self, factor: i64) -> Self {
        Offset([self.0[0] * factor, self.0[1] * factor])
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorRepr", into = "GeneratorRepr")]
pub struct StencilGenerator {
    dim: usize,
    entries: Vec<(Offset, f64)>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorRepr {
    offsets: Vec<Vec<i64>>,
    rates: Vec<f64>,
}

impl TryFrom<GeneratorRepr> for StencilGenerator {
    type Error = Error;

    fn try_from(r: GeneratorRepr) -> Result<Self> {
        if r.offsets.len() != r.rates.len() {
            return Err(Error::invalid(format!(
                "generator has {} offsets but {} rates",
                r.offsets.len(),
                r.rates.len()
            )));
        }
        let dim = r.offsets.first().map_or(1, Vec::len);
        let mut entries = Vec::with_capacity(r.rates.len());
        for (o, rate) in r.offsets.iter().zip(&r.rates) {
            let offset = match o.as_slice() {
                [a] if dim == 1 => Offset::d1(*a),
                [a, b] if dim == 2 => Offset::d2(*a, *b),
                _ => {
                    return Err(Error::invalid(format!(
                        "generator offsets must all have length 1 or all length 2, got {o:?}"
                    )))
                }
            };
            entries.push((offset, *rate));
        }
        StencilGenerator::new(dim, entries)
    }
}

impl From<StencilGenerator> for GeneratorRepr {
    fn from(g: StencilGenerator) -> Self {
        GeneratorRepr {
            offsets: g
                .entries
                .iter()
                .map(|(o, _)| o.0[..g.dim].to_vec())
                .collect(),
            rates: g.entries.iter().map(|(_, r)| *r).collect(),
        }
    }
}

impl StencilGenerator {
    /// Normalizes the rates to sum to one. Zero-rate entries are dropped.
    pub fn new(dim: usize, entries: Vec<(Offset, f64)>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid(format!("generator dim must be 1 or 2, got {dim}")));
        }
        let mut kept: Vec<(Offset, f64)> = Vec::with_capacity(entries.len());
        for (offset, rate) in entries {
            if offset.is_zero() {
                return Err(Error::invalid("generator offset 0 is implied by the diagonal"));
            }
            if dim == 1 && offset.0[1] != 0 {
                return Err(Error::invalid(format!(
                    "1D generator offset has a second component: {:?}",
                    offset.0
                )));
            }
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::invalid(format!(
                    "generator rates must be finite and nonnegative, got {rate}"
                )));
            }
            if rate > 0.0 {
                kept.push((offset, rate));
            }
        }
        kept.sort_by_key(|e| e.0);
        if kept.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("generator offsets must be distinct"));
        }
        if kept.is_empty() {
            return Err(Error::invalid("generator needs at least one positive rate"));
        }
        let total: f64 = kept.iter().map(|(_, r)| r).sum();
        for e in &mut kept {
            e.1 /= total;
        }
        Ok(StencilGenerator { dim, entries: kept })
    }

    pub fn from_1d(rates: &[(i64, f64)]) -> Result<Self> {
        Self::new(1, rates.iter().map(|&(v, r)| (Offset::d1(v), r)).collect())
    }

    /// Equal rates to the `2·dim` nearest neighbours.
    pub fn nearest_neighbor(dim: usize) -> Result<Self> {
        let entries = match dim {
            1 => vec![(Offset::d1(-1), 1.0), (Offset::d1(1), 1.0)],
            2 => vec![
                (Offset::d2(-1, 0), 1.0),
                (Offset::d2(1, 0), 1.0),
                (Offset::d2(0, -1), 1.0),
                (Offset::d2(0, 1), 1.0),
            ],
            _ => return Err(Error::invalid(format!("generator dim must be 1 or 2, got {dim}"))),
        };
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(Offset, f64)] {
        &self.entries
    }

    /// Offsets multiplied by an integer dilation; rates unchanged.
    pub fn dilated(&self, dilation: i64) -> Self {
        StencilGenerator {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|(o, r)| (o.scaled(dilation), *r))
                .collect(),
        }
    }

    /// Largest |offset component| along `axis`.
    pub fn reach(&self, axis: usize) -> usize {
        self.entries
            .iter()
            .map(|(o, _)| o.0[axis].unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn radius(&self) -> usize {
        (0..self.dim).map(|a| self.reach(a)).max().unwrap_or(0)
    }

    /// True when `δ_v = δ_{-v}` for every offset.
    pub fn is_symmetric(&self) -> bool {
        self.entries.iter().all(|(o, r)| {
            let neg = o.scaled(-1);
            self.entries.iter().any(|(p, s)| *p == neg && s == r)
        })
    }

    /// First moment `Σ_v v δ_v` per axis.
    pub fn drift(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (o, r) in &self.entries {
            m[0] += o.0[0] as f64 * r;
            m[1] += o.0[1] as f64 * r;
        }
        m
    }
}

/// Symmetric `d × d` matrix of offset second moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentMatrix {
    pub dim: usize,
    pub m: [[f64; 2]; 2],
}

impl MomentMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    /// The scalar `m₂` of a 1D generator (the trace in 2D).
    pub fn scalar(&self) -> f64 {
        self.trace()
    }
}

/// `M_ij = Σ_v v_i v_j δ_v`.
pub fn second_moment(gen: &StencilGenerator) -> MomentMatrix {
    let mut m = [[0.0; 2]; 2];
    for (o, r) in &gen.entries {
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += (o.0[i] * o.0[j]) as f64 * r;
            }
        }
    }
    MomentMatrix { dim: gen.dim, m }
}

/// Rates drawn i.i.d. uniform on (0, 1] for every nonzero offset in
/// `[-radius, radius]^dim` (lexicographic order), then normalized.
pub fn random_generator(rng: &RngSpec, radius: usize, dim: usize) -> Result<StencilGenerator> {
    if radius == 0 {
        return Err(Error::invalid("generator radius must be >= 1"));
    }
    if !(1..=2).contains(&dim) {
        return Err(Error::invalid(format!("generator dim must be 1 or 2, got {dim}")));
    }
    let r = radius as i64;
    let mut stream = rng.stream();
    let mut entries = Vec::new();
    let second_axis: Vec<i64> = if dim == 2 { (-r..=r).collect() } else { vec![0] };
    for a in -r..=r {
        for &b in &second_axis {
            let o = Offset([a, b]);
            if o.is_zero() {
                continue;
            }
            let u: f64 = stream.gen();
            entries.push((o, 1.0 - u));
        }
    }
    StencilGenerator::new(dim, entries)
}
