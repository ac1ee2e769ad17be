//! Generative ranking models used to synthesize labeled datasets:
//! Kendall-tau Mallows, Plackett–Luce, and finite mixtures of both.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{check_dims, kendall_tau, n_pairs, Permutation, RankingSample, WEIGHT_SUM_TOL};

/// Dispersion presets exposed for mixture experiments.
pub const PHI_PRESETS: [f64; 4] = [0.1, 0.3, 0.5, 0.7];

/// Default ratio of the geometric Plackett–Luce worths.
pub const DEFAULT_PL_RATIO: f64 = 0.5;

/// Mallows model with Kendall tau distance: `P(σ) ∝ exp(-phi · d(σ, center))`.
#[derive(Clone, Debug, PartialEq)]
pub struct MallowsParams {
    pub center: Permutation,
    pub phi: f64,
}

impl MallowsParams {
    pub fn new(center: Permutation, phi: f64) -> Result<Self> {
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(Error::InvalidInput(format!("Mallows phi must be positive, got {}", phi)));
        }
        Ok(MallowsParams { center, phi })
    }

    pub fn n(&self) -> usize {
        self.center.n()
    }

    /// `ln Z(phi)` with `Z = Π_{j=1}^{n} (1 - e^{-j phi}) / (1 - e^{-phi})`.
    pub fn log_normalizer(&self) -> f64 {
        let denom = (-(-self.phi).exp_m1()).ln();
        (1..=self.n()).map(|j| (-(-(j as f64) * self.phi).exp_m1()).ln() - denom).sum()
    }

    /// One draw by repeated insertion.
    ///
    /// Items are inserted in center order; the `j`-th item lands ahead of
    /// exactly `v ∈ {0..j}` already placed items with probability
    /// `∝ exp(-phi v)`. Each such item is one discordant pair, so the total
    /// distance is `Σ v` and the draw is exact.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Permutation {
        let center_order = self.center.ordering();
        let n = center_order.len();
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut weights: Vec<f64> = Vec::with_capacity(n);
        for (j, &item) in center_order.iter().enumerate() {
            weights.clear();
            weights.extend((0..=j).map(|v| (-self.phi * v as f64).exp()));
            let v = draw_index(&weights, rng);
            order.insert(j - v, item);
        }
        Permutation::from_ordering(&order).expect("insertion yields a permutation")
    }
}

/// Plackett–Luce model: items are drawn sequentially without replacement with
/// probability proportional to their worth.
#[derive(Clone, Debug, PartialEq)]
pub struct PlackettLuceParams {
    pub weights: Vec<f64>,
}

impl PlackettLuceParams {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("Plackett-Luce needs at least one item".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("Plackett-Luce worths must be positive".into()));
        }
        Ok(PlackettLuceParams { weights })
    }

    /// Worths `ratio^r` for the item placed at rank `r` of `center`.
    pub fn geometric(center: &Permutation, ratio: f64) -> Result<Self> {
        Self::new((0..center.n()).map(|i| ratio.powi(center.rank(i) as i32)).collect())
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Permutation {
        let mut remaining: Vec<usize> = (0..self.n()).collect();
        let mut order = Vec::with_capacity(self.n());
        let mut w: Vec<f64> = Vec::with_capacity(self.n());
        while !remaining.is_empty() {
            w.clear();
            w.extend(remaining.iter().map(|&i| self.weights[i]));
            let k = draw_index(&w, rng);
            order.push(remaining.remove(k));
        }
        Permutation::from_ordering(&order).expect("sequential draw yields a permutation")
    }
}

/// Inverse-CDF draw from unnormalized nonnegative weights.
fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    // rounding can leave u == total; fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub fn sample_mallows<R: Rng + ?Sized>(params: &MallowsParams, count: usize, rng: &mut R) -> Result<RankingSample> {
    if count == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let rankings = (0..count).map(|_| params.sample_one(rng)).collect();
    RankingSample::new(params.n(), rankings)
}

/// Exact Mallows probability of `sigma`.
pub fn mallows_pmf(params: &MallowsParams, sigma: &Permutation) -> Result<f64> {
    if !(params.phi > 0.0) {
        return Err(Error::InvalidInput(format!("Mallows phi must be positive, got {}", params.phi)));
    }
    let d = kendall_tau(&params.center, sigma)? as f64;
    Ok((-params.phi * d - params.log_normalizer()).exp())
}

pub fn sample_plackett_luce<R: Rng + ?Sized>(
    params: &PlackettLuceParams,
    count: usize,
    rng: &mut R,
) -> Result<RankingSample> {
    if count == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let rankings = (0..count).map(|_| params.sample_one(rng)).collect();
    RankingSample::new(params.n(), rankings)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ComponentModel {
    Mallows(MallowsParams),
    PlackettLuce(PlackettLuceParams),
}

impl ComponentModel {
    pub fn n(&self) -> usize {
        match self {
            ComponentModel::Mallows(m) => m.n(),
            ComponentModel::PlackettLuce(p) => p.n(),
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Permutation {
        match self {
            ComponentModel::Mallows(m) => m.sample_one(rng),
            ComponentModel::PlackettLuce(p) => p.sample_one(rng),
        }
    }

    /// Modal ranking: the Mallows center, or items by decreasing worth.
    pub fn mode(&self) -> Permutation {
        match self {
            ComponentModel::Mallows(m) => m.center.clone(),
            ComponentModel::PlackettLuce(p) => {
                let mut order: Vec<usize> = (0..p.n()).collect();
                order.sort_by(|&a, &b| p.weights[b].total_cmp(&p.weights[a]).then(a.cmp(&b)));
                Permutation::from_ordering(&order).expect("sorted items form a permutation")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureComponent {
    pub model: ComponentModel,
    pub mix: f64,
}

/// Finite mixture of ranking models with a sampling seed.
///
/// Serialized as
/// `{"n", "seed", "components": [{"type", "center"?, "phi"?, "weights"?, "mix"}]}`
/// with 1-based center ranks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixtureSpec", into = "RawMixtureSpec")]
pub struct MixtureSpec {
    pub n: usize,
    pub seed: u64,
    pub components: Vec<MixtureComponent>,
}

impl MixtureSpec {
    pub fn new(n: usize, seed: u64, components: Vec<MixtureComponent>) -> Result<Self> {
        let spec = MixtureSpec { n, seed, components };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidInput("mixture has no components".into()));
        }
        for c in &self.components {
            check_dims(self.n, c.model.n())?;
            if !(c.mix > 0.0) || !c.mix.is_finite() {
                return Err(Error::InvalidInput("mixing weights must be positive".into()));
            }
        }
        let total: f64 = self.components.iter().map(|c| c.mix).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!("mixing weights sum to {}, not 1", total)));
        }
        Ok(())
    }

    /// Equal-weight Mallows mixture around the given centers.
    pub fn mallows(centers: &[Permutation], phi: f64, seed: u64) -> Result<Self> {
        let n = centers.first().map(|c| c.n()).unwrap_or(0);
        let mix = 1.0 / centers.len() as f64;
        let components = centers
            .iter()
            .map(|c| Ok(MixtureComponent { model: ComponentModel::Mallows(MallowsParams::new(c.clone(), phi)?), mix }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, seed, components)
    }

    /// Equal-weight Plackett–Luce mixture with geometric worths around the
    /// given modal rankings.
    pub fn plackett_luce(centers: &[Permutation], ratio: f64, seed: u64) -> Result<Self> {
        let n = centers.first().map(|c| c.n()).unwrap_or(0);
        let mix = 1.0 / centers.len() as f64;
        let components = centers
            .iter()
            .map(|c| {
                Ok(MixtureComponent {
                    model: ComponentModel::PlackettLuce(PlackettLuceParams::geometric(c, ratio)?),
                    mix,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, seed, components)
    }

    pub fn modes(&self) -> Vec<Permutation> {
        self.components.iter().map(|c| c.model.mode()).collect()
    }
}

/// Draws `count` rankings, recording the component index of each as its label.
pub fn sample_mixture(spec: &MixtureSpec, count: usize) -> Result<RankingSample> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mixes: Vec<f64> = spec.components.iter().map(|c| c.mix).collect();
    let mut rankings = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        // a single component consumes no randomness for the choice
        let k = if mixes.len() == 1 { 0 } else { draw_index(&mixes, &mut rng) };
        rankings.push(spec.components[k].model.sample_one(&mut rng));
        labels.push(k);
    }
    RankingSample::with_labels(spec.n, rankings, labels)
}

/// Default minimum Kendall tau separation between mixture centers, `n(n-1)/8`.
pub fn default_separation(n: usize) -> f64 {
    n_pairs(n) as f64 / 4.0
}

/// Draws `k` uniform centers whose pairwise distances are all at least
/// `min_separation`, resampling any candidate that lands too close.
pub fn random_centers<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    min_separation: f64,
    rng: &mut R,
) -> Result<Vec<Permutation>> {
    const MAX_ATTEMPTS: usize = 100_000;
    let mut centers: Vec<Permutation> = Vec::with_capacity(k);
    let mut attempts = 0;
    while centers.len() < k {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::InvalidInput(format!(
                "could not place {} centers at separation {} for n = {}",
                k, min_separation, n
            )));
        }
        let cand = Permutation::random(n, rng);
        if centers.iter().all(|c| kendall_tau(c, &cand).map(|d| d as f64 >= min_separation).unwrap_or(false)) {
            centers.push(cand);
        }
    }
    Ok(centers)
}

/// Equal-weight Mallows mixture with separated random centers. Centers are
/// drawn from a stream derived from `seed`; samples use `seed` itself.
pub fn mallows_mixture_preset(
    n: usize,
    k: usize,
    phi: f64,
    min_separation: Option<f64>,
    seed: u64,
) -> Result<MixtureSpec> {
    let mut rng = center_rng(seed);
    let centers = random_centers(n, k, min_separation.unwrap_or_else(|| default_separation(n)), &mut rng)?;
    MixtureSpec::mallows(&centers, phi, seed)
}

/// Equal-weight Plackett–Luce mixture with worths `ratio^rank` around
/// separated random modes.
pub fn plackett_luce_mixture_preset(
    n: usize,
    k: usize,
    ratio: f64,
    min_separation: Option<f64>,
    seed: u64,
) -> Result<MixtureSpec> {
    let mut rng = center_rng(seed);
    let centers = random_centers(n, k, min_separation.unwrap_or_else(|| default_separation(n)), &mut rng)?;
    MixtureSpec::plackett_luce(&centers, ratio, seed)
}

fn center_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15)
}

#[derive(Serialize, Deserialize)]
struct RawMixtureSpec {
    n: usize,
    seed: u64,
    components: Vec<RawComponent>,
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    mix: f64,
}

impl TryFrom<RawMixtureSpec> for MixtureSpec {
    type Error = Error;

    fn try_from(raw: RawMixtureSpec) -> Result<Self> {
        let components = raw
            .components
            .into_iter()
            .map(|c| {
                let model = match c.kind.as_str() {
                    "mallows" => {
                        let center =
                            c.center.ok_or_else(|| Error::InvalidInput("mallows component needs a center".into()))?;
                        let phi = c.phi.ok_or_else(|| Error::InvalidInput("mallows component needs phi".into()))?;
                        ComponentModel::Mallows(MallowsParams::new(Permutation::from_ranks_one_based(&center)?, phi)?)
                    }
                    "plackett_luce" => {
                        let w = c
                            .weights
                            .ok_or_else(|| Error::InvalidInput("plackett_luce component needs weights".into()))?;
                        ComponentModel::PlackettLuce(PlackettLuceParams::new(w)?)
                    }
                    other => return Err(Error::InvalidInput(format!("unknown component type {:?}", other))),
                };
                Ok(MixtureComponent { model, mix: c.mix })
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureSpec::new(raw.n, raw.seed, components)
    }
}

impl From<MixtureSpec> for RawMixtureSpec {
    fn from(spec: MixtureSpec) -> Self {
        RawMixtureSpec {
            n: spec.n,
            seed: spec.seed,
            components: spec
                .components
                .into_iter()
                .map(|c| match c.model {
                    ComponentModel::Mallows(m) => RawComponent {
                        kind: "mallows".into(),
                        center: Some(m.center.ranks_one_based()),
                        phi: Some(m.phi),
                        weights: None,
                        mix: c.mix,
                    },
                    ComponentModel::PlackettLuce(p) => RawComponent {
                        kind: "plackett_luce".into(),
                        center: None,
                        phi: None,
                        weights: Some(p.weights),
                        mix: c.mix,
                    },
                })
                .collect(),
        }
    }
}
