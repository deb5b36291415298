//! Pulse envelopes, frequency-shifting codewords and pulse-train synthesis.
//!
//! A pulse train is described lazily by [`WaveformSpec`]; `s(t)` and its
//! derivative are evaluated in closed form at arbitrary instants, which the
//! ambiguity function needs because it probes the replica at stretched,
//! off-grid times `γ(nΔ − τ)`.
//!
//! Three kinds of train share the same envelope and pulse grid:
//!
//! * RSF: pulse `k` sits on carrier `f0 + d_k·δf`;
//! * Monotone: every pulse on `f0`;
//! * OFDM: every pulse carries all subcarriers `f0 + d_l·δf`, scaled by `1/√L`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsfError};
use crate::stats;

/// Largest Costas order enumerated by backtracking.
pub const MAX_COSTAS_ORDER: usize = 12;

// ── Envelope ────────────────────────────────────────────────────────

type EnvelopeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied envelope: value and derivative callables on `[0, T]`.
///
/// The callables are only consulted inside the support; outside it the
/// envelope is zero regardless of what they return.
#[derive(Clone)]
pub struct CustomEnvelope {
    pub duration: f64,
    /// Declares `β(t) = β(T − t)`. Gates the compact MSE formulas.
    pub symmetric: bool,
    value: EnvelopeFn,
    deriv: EnvelopeFn,
}

impl CustomEnvelope {
    pub fn new<V, D>(duration: f64, symmetric: bool, value: V, deriv: D) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            duration,
            symmetric,
            value: Arc::new(value),
            deriv: Arc::new(deriv),
        }
    }
}

impl fmt::Debug for CustomEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomEnvelope")
            .field("duration", &self.duration)
            .field("symmetric", &self.symmetric)
            .finish_non_exhaustive()
    }
}

/// Pulse envelope `β(t)`, time-limited to `[0, T]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "EnvelopeDoc", into = "EnvelopeDoc")]
pub enum Envelope {
    /// `β(t) = t³(T − t)³` on `[0, T]`.
    PolySmooth { duration: f64 },
    Custom(CustomEnvelope),
}

impl Envelope {
    pub fn poly_smooth(duration: f64) -> Self {
        Envelope::PolySmooth { duration }
    }

    pub fn duration(&self) -> f64 {
        match self {
            Envelope::PolySmooth { duration } => *duration,
            Envelope::Custom(c) => c.duration,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Envelope::PolySmooth { .. } => true,
            Envelope::Custom(c) => c.symmetric,
        }
    }

    /// `β(t)`; exactly zero outside `[0, T]`.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let tt = self.duration();
        if !(0.0..=tt).contains(&t) {
            return 0.0;
        }
        match self {
            Envelope::PolySmooth { duration } => {
                let p = t * (duration - t);
                p * p * p
            }
            Envelope::Custom(c) => (c.value)(t),
        }
    }

    /// `β̇(t)`; exactly zero outside `[0, T]`.
    #[inline]
    pub fn deriv(&self, t: f64) -> f64 {
        let tt = self.duration();
        if !(0.0..=tt).contains(&t) {
            return 0.0;
        }
        match self {
            Envelope::PolySmooth { duration } => {
                let r = duration - t;
                3.0 * t * t * r * r * (duration - 2.0 * t)
            }
            Envelope::Custom(c) => (c.deriv)(t),
        }
    }

    fn validate(&self) -> Result<()> {
        let t = self.duration();
        if !(t.is_finite() && t > 0.0) {
            return Err(RsfError::validation("envelope.t_s", format!("duration must be positive, got {t}")));
        }
        Ok(())
    }
}

/// Free function form of [`Envelope::value`].
pub fn envelope_value(env: &Envelope, t: f64) -> f64 {
    env.value(t)
}

/// Free function form of [`Envelope::deriv`].
pub fn envelope_deriv(env: &Envelope, t: f64) -> f64 {
    env.deriv(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EnvelopeKind {
    PolySmooth,
    Custom,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeDoc {
    kind: EnvelopeKind,
    t_s: f64,
}

impl TryFrom<EnvelopeDoc> for Envelope {
    type Error = String;

    fn try_from(doc: EnvelopeDoc) -> std::result::Result<Self, String> {
        match doc.kind {
            EnvelopeKind::PolySmooth => Ok(Envelope::PolySmooth { duration: doc.t_s }),
            EnvelopeKind::Custom => Err("custom envelopes are code-only and cannot be loaded from JSON".into()),
        }
    }
}

impl From<Envelope> for EnvelopeDoc {
    fn from(env: Envelope) -> Self {
        let kind = match env {
            Envelope::PolySmooth { .. } => EnvelopeKind::PolySmooth,
            Envelope::Custom(_) => EnvelopeKind::Custom,
        };
        EnvelopeDoc {
            kind,
            t_s: env.duration(),
        }
    }
}

// ── Codewords ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Costas,
    Dumbbell,
    UniformRandom,
    Explicit,
}

/// Frequency-shifting codeword `d_0 … d_{K−1}` (or OFDM subcarrier offsets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Codeword {
    pub generator: Generator,
    /// Allowed offsets, sorted ascending.
    pub alphabet: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Codeword {
    /// Pass-through codeword. An empty alphabet means "whatever values occur".
    pub fn explicit(values: Vec<f64>, alphabet: Vec<f64>) -> Result<Self> {
        let alphabet = if alphabet.is_empty() {
            values.clone()
        } else {
            alphabet
        };
        let cw = Codeword {
            generator: Generator::Explicit,
            alphabet: sorted_unique(alphabet),
            values,
            seed: 0,
        };
        cw.validate()?;
        Ok(cw)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest offset magnitude allowed by the alphabet.
    pub fn max_offset(&self) -> f64 {
        self.alphabet.iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }

    pub fn variance(&self) -> f64 {
        stats::var(&self.values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(RsfError::validation("codeword.values", "codeword is empty"));
        }
        if self.alphabet.is_empty() {
            return Err(RsfError::validation("codeword.alphabet", "alphabet is empty"));
        }
        for (k, d) in self.values.iter().enumerate() {
            if !d.is_finite() {
                return Err(RsfError::validation("codeword.values", format!("d_{k} is not finite")));
            }
            if !self.alphabet.iter().any(|a| (a - d).abs() <= 1e-12 * (1.0 + a.abs())) {
                return Err(RsfError::validation(
                    "codeword.values",
                    format!("d_{k} = {d} is not in the alphabet"),
                ));
            }
        }
        if self.generator == Generator::Costas {
            let ranks = self.ranks();
            if !is_costas(&ranks) {
                return Err(RsfError::validation("codeword.values", "not a Costas permutation"));
            }
        }
        Ok(())
    }

    /// Rank of each value within the sorted alphabet.
    pub fn ranks(&self) -> Vec<usize> {
        self.values
            .iter()
            .map(|d| {
                self.alphabet
                    .iter()
                    .position(|a| (a - d).abs() <= 1e-12 * (1.0 + a.abs()))
                    .unwrap_or(usize::MAX)
            })
            .collect()
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| a == b);
    v
}

/// Builds a codeword from a generator. `Explicit` needs values and goes
/// through [`Codeword::explicit`] instead.
pub fn make_codeword(generator: Generator, k: usize, alphabet: &[f64], seed: u64) -> Result<Codeword> {
    if alphabet.is_empty() {
        return Err(RsfError::validation("codeword.alphabet", "alphabet is empty"));
    }
    if k == 0 {
        return Err(RsfError::validation("k_pulses", "need at least one pulse"));
    }
    let alphabet = sorted_unique(alphabet.to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = match generator {
        Generator::Costas => {
            if k != alphabet.len() {
                return Err(RsfError::validation(
                    "codeword.alphabet",
                    format!("Costas needs K = |alphabet| (K = {k}, |alphabet| = {})", alphabet.len()),
                ));
            }
            let perms = costas_permutations(k)?;
            let pick = &perms[rng.random_range(0..perms.len())];
            pick.iter().map(|&r| alphabet[r]).collect()
        }
        Generator::Dumbbell => {
            let (lo, hi) = (alphabet[0], alphabet[alphabet.len() - 1]);
            (0..k).map(|i| if i % 2 == 0 { hi } else { lo }).collect()
        }
        Generator::UniformRandom => (0..k).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect(),
        Generator::Explicit => {
            return Err(RsfError::validation(
                "codeword.generator",
                "explicit codewords carry their own values",
            ))
        }
    };
    Ok(Codeword {
        generator,
        alphabet,
        values,
        seed,
    })
}

/// Distinct-difference check: all `(j − i, p_j − p_i)` for `i < j` differ.
pub fn is_costas(perm: &[usize]) -> bool {
    let n = perm.len();
    let mut seen = std::collections::HashSet::with_capacity(n * n);
    let mut used = vec![false; n];
    for &p in perm {
        if p >= n || used[p] {
            return false;
        }
        used[p] = true;
    }
    for i in 0..n {
        for j in i + 1..n {
            if !seen.insert((j - i, perm[j] as isize - perm[i] as isize)) {
                return false;
            }
        }
    }
    true
}

/// All Costas permutations of `0..n`, in lexicographic order. Cached per order.
pub fn costas_permutations(n: usize) -> Result<Arc<Vec<Vec<usize>>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<Vec<usize>>>>>> = OnceLock::new();
    if n == 0 || n > MAX_COSTAS_ORDER {
        return Err(RsfError::validation(
            "k_pulses",
            format!("Costas order must be in 1..={MAX_COSTAS_ORDER}, got {n}"),
        ));
    }
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return Ok(hit.clone());
    }
    let mut out = Vec::new();
    let mut perm = Vec::with_capacity(n);
    let mut used = vec![false; n];
    // diffs[d][v + n] marks value difference v already used at index distance d
    let mut diffs = vec![vec![false; 2 * n]; n];
    backtrack(n, &mut perm, &mut used, &mut diffs, &mut out);
    if out.is_empty() {
        return Err(RsfError::NoCostas(n));
    }
    let out = Arc::new(out);
    cache.lock().unwrap().insert(n, out.clone());
    Ok(out)
}

fn backtrack(
    n: usize,
    perm: &mut Vec<usize>,
    used: &mut [bool],
    diffs: &mut [Vec<bool>],
    out: &mut Vec<Vec<usize>>,
) {
    let j = perm.len();
    if j == n {
        out.push(perm.clone());
        return;
    }
    for v in 0..n {
        if used[v] {
            continue;
        }
        let clash = (0..j).any(|i| diffs[j - i][(v + n) - perm[i]]);
        if clash {
            continue;
        }
        for i in 0..j {
            diffs[j - i][(v + n) - perm[i]] = true;
        }
        used[v] = true;
        perm.push(v);
        backtrack(n, perm, used, diffs, out);
        perm.pop();
        used[v] = false;
        for i in 0..j {
            diffs[j - i][(v + n) - perm[i]] = false;
        }
    }
}

// ── Waveform ────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    Rsf,
    Ofdm,
    Monotone,
}

/// Full description of a pulse train.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSpec {
    pub kind: WaveformKind,
    pub f0_hz: f64,
    pub delta_f_hz: f64,
    pub k_pulses: usize,
    pub tr_s: f64,
    pub envelope: Envelope,
    /// RSF: per-pulse offsets. OFDM: subcarrier offsets. Monotone: unused.
    #[serde(default)]
    pub codeword: Option<Codeword>,
}

impl WaveformSpec {
    pub fn rsf(f0_hz: f64, delta_f_hz: f64, tr_s: f64, envelope: Envelope, codeword: Codeword) -> Result<Self> {
        let spec = WaveformSpec {
            kind: WaveformKind::Rsf,
            f0_hz,
            delta_f_hz,
            k_pulses: codeword.len(),
            tr_s,
            envelope,
            codeword: Some(codeword),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn monotone(f0_hz: f64, k_pulses: usize, tr_s: f64, envelope: Envelope) -> Result<Self> {
        let spec = WaveformSpec {
            kind: WaveformKind::Monotone,
            f0_hz,
            delta_f_hz: 0.0,
            k_pulses,
            tr_s,
            envelope,
            codeword: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ofdm(
        f0_hz: f64,
        delta_f_hz: f64,
        k_pulses: usize,
        tr_s: f64,
        envelope: Envelope,
        subcarriers: Codeword,
    ) -> Result<Self> {
        let spec = WaveformSpec {
            kind: WaveformKind::Ofdm,
            f0_hz,
            delta_f_hz,
            k_pulses,
            tr_s,
            envelope,
            codeword: Some(subcarriers),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0_hz.is_finite() && self.f0_hz > 0.0) {
            return Err(RsfError::validation("f0_hz", format!("must be > 0, got {}", self.f0_hz)));
        }
        if !(self.delta_f_hz.is_finite() && self.delta_f_hz >= 0.0) {
            return Err(RsfError::validation(
                "delta_f_hz",
                format!("must be >= 0, got {}", self.delta_f_hz),
            ));
        }
        if self.k_pulses == 0 {
            return Err(RsfError::validation("k_pulses", "need at least one pulse"));
        }
        if !(self.tr_s.is_finite() && self.tr_s > 0.0) {
            return Err(RsfError::validation("tr_s", format!("must be > 0, got {}", self.tr_s)));
        }
        self.envelope.validate()?;
        if self.envelope.duration() >= 0.5 * self.tr_s {
            return Err(RsfError::validation(
                "envelope.t_s",
                format!(
                    "pulse duration {} must be below half the PRI {}",
                    self.envelope.duration(),
                    self.tr_s
                ),
            ));
        }
        match self.kind {
            WaveformKind::Rsf => {
                let cw = self
                    .codeword
                    .as_ref()
                    .ok_or_else(|| RsfError::validation("codeword", "RSF waveform needs a codeword"))?;
                cw.validate()?;
                if cw.len() != self.k_pulses {
                    return Err(RsfError::validation(
                        "codeword.values",
                        format!("length {} does not match k_pulses {}", cw.len(), self.k_pulses),
                    ));
                }
            }
            WaveformKind::Ofdm => {
                let cw = self
                    .codeword
                    .as_ref()
                    .ok_or_else(|| RsfError::validation("codeword", "OFDM waveform needs subcarrier offsets"))?;
                cw.validate()?;
            }
            WaveformKind::Monotone => {}
        }
        if let Some((i, f)) = self.carrier_freqs().into_iter().enumerate().find(|(_, f)| *f <= 0.0) {
            return Err(RsfError::validation(
                "codeword.values",
                format!("carrier {i} is {f} Hz; all carriers must be positive"),
            ));
        }
        Ok(())
    }

    pub fn pulse_duration(&self) -> f64 {
        self.envelope.duration()
    }

    /// End of the last pulse, `(K − 1)·Tr + T`.
    pub fn span(&self) -> f64 {
        (self.k_pulses as f64 - 1.0) * self.tr_s + self.envelope.duration()
    }

    /// RSF/Monotone: one carrier per pulse. OFDM: one per subcarrier.
    pub fn carrier_freqs(&self) -> Vec<f64> {
        match self.kind {
            WaveformKind::Monotone => vec![self.f0_hz; self.k_pulses],
            WaveformKind::Rsf | WaveformKind::Ofdm => match &self.codeword {
                Some(cw) => cw.values.iter().map(|d| self.f0_hz + d * self.delta_f_hz).collect(),
                None => Vec::new(),
            },
        }
    }

    /// Precomputed per-pulse view used by the hot loops.
    pub fn layout(&self) -> PulseLayout {
        let freqs = self.carrier_freqs();
        let (pulse_freqs, tones) = match self.kind {
            WaveformKind::Ofdm => (vec![0.0; self.k_pulses], freqs),
            _ => (freqs, Vec::new()),
        };
        PulseLayout {
            k: self.k_pulses,
            tr: self.tr_s,
            t: self.envelope.duration(),
            pulse_freqs,
            ofdm_scale: if tones.is_empty() { 1.0 } else { 1.0 / (tones.len() as f64).sqrt() },
            tones,
            envelope: self.envelope.clone(),
        }
    }

    pub fn signal_value(&self, t: f64) -> Complex64 {
        self.layout().value(t)
    }

    pub fn signal_deriv(&self, t: f64) -> Complex64 {
        self.layout().deriv(t)
    }
}

/// Free function form of [`WaveformSpec::carrier_freqs`] with validation.
pub fn carrier_freqs(spec: &WaveformSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(spec.carrier_freqs())
}

/// Flattened pulse-train description for repeated evaluation.
#[derive(Debug, Clone)]
pub struct PulseLayout {
    pub k: usize,
    pub tr: f64,
    pub t: f64,
    /// Carrier of each pulse (zero for OFDM, whose carriers live in `tones`).
    pub pulse_freqs: Vec<f64>,
    /// OFDM subcarriers; empty for single-carrier trains.
    pub tones: Vec<f64>,
    pub ofdm_scale: f64,
    pub envelope: Envelope,
}

impl PulseLayout {
    /// Pulse index and local time for `t`, if `t` falls inside a pulse.
    #[inline]
    pub fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if !(t >= 0.0) {
            return None;
        }
        let k = (t / self.tr).floor();
        if k >= self.k as f64 {
            return None;
        }
        let k = k as usize;
        let u = t - k as f64 * self.tr;
        (u <= self.t).then_some((k, u))
    }

    /// Carrier phasor sum at local time `u` of pulse `k`, and its `d/du`
    /// factor `Σ j2πf·e^{j2πfu}`.
    #[inline]
    fn carrier(&self, k: usize, u: f64) -> (Complex64, Complex64) {
        if self.tones.is_empty() {
            let f = self.pulse_freqs[k];
            let (s, c) = (2.0 * PI * f * u).sin_cos();
            let e = Complex64::new(c, s);
            (e, Complex64::new(0.0, 2.0 * PI * f) * e)
        } else {
            let mut e = Complex64::new(0.0, 0.0);
            let mut de = Complex64::new(0.0, 0.0);
            for &f in &self.tones {
                let (s, c) = (2.0 * PI * f * u).sin_cos();
                let ph = Complex64::new(c, s);
                e += ph;
                de += Complex64::new(0.0, 2.0 * PI * f) * ph;
            }
            (e * self.ofdm_scale, de * self.ofdm_scale)
        }
    }

    /// `s` at local time `u` of pulse `k` (no support check on `u`).
    #[inline]
    pub fn pulse_value(&self, k: usize, u: f64) -> Complex64 {
        let b = self.envelope.value(u);
        if b == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.carrier(k, u).0 * b
    }

    #[inline]
    pub fn pulse_deriv(&self, k: usize, u: f64) -> Complex64 {
        let (e, de) = self.carrier(k, u);
        e * self.envelope.deriv(u) + de * self.envelope.value(u)
    }

    #[inline]
    pub fn value(&self, t: f64) -> Complex64 {
        match self.locate(t) {
            Some((k, u)) => self.pulse_value(k, u),
            None => Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    pub fn deriv(&self, t: f64) -> Complex64 {
        match self.locate(t) {
            Some((k, u)) => self.pulse_deriv(k, u),
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// The `C = {−2.5, −1.5, …, 2.5}` alphabet used throughout the figures.
pub fn half_integer_alphabet(k: usize) -> Vec<f64> {
    let c = (k as f64 - 1.0) / 2.0;
    (0..k).map(|i| i as f64 - c).collect()
}
