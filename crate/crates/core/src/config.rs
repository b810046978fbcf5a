//! Run configuration: a TOML file with `[system]`, `[cavity]`, `[scf]`,
//! `[prop]`, `[spectrum]`, `[hhg]`, `[oracle]` and `[output]` tables.
//! Parsing collects every problem (unknown keys, wrong types, missing or
//! out-of-range values) before failing.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::grid::{Grid, Stencil};
use crate::oracle::Flavor;
use crate::potentials::{Ion, IonSet, PotentialModel, XcKind};
use crate::scf::{Minimizer, ScfConfig};
use crate::spectra::{SpectrumConfig, Window};
use crate::system::{aufbau_occupations, System};
use crate::tdprop::{FieldProtocol, LaserPulse, PropConfig};

/// λ = 1/√(ε₀ V_eff) with ε₀ = 1/(4π) in atomic units.
pub fn lambda_from_volume(v_eff: f64) -> f64 {
    (4.0 * std::f64::consts::PI / v_eff).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Binding {
    Ions(Vec<Ion>),
    /// V = ½ ω₀² |r|²
    Harmonic(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub dimension: usize,
    pub shape: [usize; 3],
    pub spacing: f64,
    pub binding: Binding,
    pub occupations: Vec<f64>,
    pub model: PotentialModel,
}

impl SystemConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dimension, self.shape, self.spacing)
    }

    pub fn build(&self) -> Result<System> {
        let grid = self.grid()?;
        match &self.binding {
            Binding::Ions(ions) => System::new(grid, IonSet::new(ions.clone()), self.model, self.occupations.clone()),
            Binding::Harmonic(w0) => System::harmonic_well(grid, *w0, self.model)?.with_occupations(self.occupations.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityConfig {
    pub omega: f64,
    pub lambda: [f64; 3],
    pub n_max: usize,
}

impl CavityConfig {
    pub fn fock(&self) -> Result<FockSpace> {
        FockSpace::new(self.n_max, self.omega, self.lambda)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HhgConfig {
    pub axis: usize,
    pub max_order: f64,
    pub d_order: f64,
    pub window: Window,
}

impl Default for HhgConfig {
    fn default() -> Self {
        HhgConfig {
            axis: 0,
            max_order: 15.0,
            d_order: 0.01,
            window: Window::Hann,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub flavor: Flavor,
    /// Run the exact-exponential propagation with the `[prop]` settings.
    pub propagate: bool,
    /// Step-halving tolerance on observables.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            flavor: Flavor::MeanFieldMu,
            propagate: false,
            tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Units {
    #[default]
    Atomic,
    /// Energies and frequencies in eV, times in fs, at the output layer only.
    EvFs,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub units: Units,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub cavity: CavityConfig,
    pub scf: ScfConfig,
    pub prop: PropConfig,
    pub spectrum: SpectrumConfig,
    pub hhg: HhgConfig,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
    /// The file as read, echoed into output headers.
    pub source: String,
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(format!("malformed config: {}", e.message())))?;
    let mut errs = Vec::new();
    let mut section = |name: &str, required: bool, errs: &mut Vec<String>| match root.remove(name) {
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            errs.push(format!("`{name}` must be a table"));
            None
        }
        None => {
            if required {
                errs.push(format!("missing required table [{name}]"));
            }
            None
        }
    };
    let system = section("system", true, &mut errs);
    let cavity = section("cavity", false, &mut errs);
    let scf = section("scf", false, &mut errs);
    let prop = section("prop", false, &mut errs);
    let spectrum = section("spectrum", false, &mut errs);
    let hhg = section("hhg", false, &mut errs);
    let oracle = section("oracle", false, &mut errs);
    let output = section("output", false, &mut errs);
    for key in root.keys() {
        errs.push(format!("unknown key `{key}`"));
    }

    let system = system.and_then(|t| read_system(Section::new("system", t, &mut errs)));
    let cavity = read_cavity(Section::new("cavity", cavity.unwrap_or_default(), &mut errs));
    let scf = read_scf(Section::new("scf", scf.unwrap_or_default(), &mut errs));
    let prop = read_prop(Section::new("prop", prop.unwrap_or_default(), &mut errs));
    let spectrum = read_spectrum(Section::new("spectrum", spectrum.unwrap_or_default(), &mut errs));
    let hhg = read_hhg(Section::new("hhg", hhg.unwrap_or_default(), &mut errs));
    let oracle = read_oracle(Section::new("oracle", oracle.unwrap_or_default(), &mut errs));
    let output = read_output(Section::new("output", output.unwrap_or_default(), &mut errs));

    if let Some(s) = &system {
        if let Err(Error::Config(e)) = s.build() {
            errs.extend(e);
        }
    }
    if let Err(Error::Config(e)) = cavity.fock() {
        errs.extend(e);
    }
    for r in [scf.validate(), prop.validate(), spectrum.validate()] {
        if let Err(Error::Config(e)) = r {
            errs.extend(e);
        }
    }
    match system {
        Some(system) if errs.is_empty() => Ok(RunConfig {
            system,
            cavity,
            scf,
            prop,
            spectrum,
            hhg,
            oracle,
            output,
            source: text.to_string(),
        }),
        _ => {
            errs.dedup();
            Err(Error::Config(errs))
        }
    }
}

struct Section<'e> {
    name: &'static str,
    table: Table,
    errs: &'e mut Vec<String>,
}

impl<'e> Section<'e> {
    fn new(name: &'static str, table: Table, errs: &'e mut Vec<String>) -> Self {
        Section { name, table, errs }
    }

    fn err(&mut self, key: &str, msg: &str) {
        self.errs.push(format!("{}.{key}: {msg}", self.name));
    }

    fn missing(&mut self, key: &str) {
        self.errs.push(format!("missing required key {}.{key}", self.name));
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        match self.table.remove(key)? {
            Value::Float(x) => Some(x),
            Value::Integer(i) => Some(i as f64),
            _ => {
                self.err(key, "expected a number");
                None
            }
        }
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        match self.table.remove(key)? {
            Value::Integer(i) if i >= 0 => Some(i as usize),
            _ => {
                self.err(key, "expected a non-negative integer");
                None
            }
        }
    }

    fn bool(&mut self, key: &str) -> Option<bool> {
        match self.table.remove(key)? {
            Value::Boolean(b) => Some(b),
            _ => {
                self.err(key, "expected true or false");
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.table.remove(key)? {
            Value::String(s) => Some(s),
            _ => {
                self.err(key, "expected a string");
                None
            }
        }
    }

    fn f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.table.remove(key)?;
        let list = match &v {
            Value::Array(a) => a
                .iter()
                .map(|x| match x {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect::<Option<Vec<f64>>>(),
            _ => None,
        };
        if list.is_none() {
            self.err(key, "expected an array of numbers");
        }
        list
    }

    fn vec3(&mut self, key: &str) -> Option<[f64; 3]> {
        let v = self.f64_list(key)?;
        match v.len() {
            1 => Some([v[0], 0.0, 0.0]),
            3 => Some([v[0], v[1], v[2]]),
            _ => {
                self.err(key, "expected 1 or 3 components");
                None
            }
        }
    }

    fn finish(self) {
        for key in self.table.keys() {
            self.errs.push(format!("unknown key {}.{key}", self.name));
        }
    }
}

fn read_system(mut s: Section) -> Option<SystemConfig> {
    let dimension = s.usize("dimension").unwrap_or(1);
    if dimension != 1 && dimension != 3 {
        s.err("dimension", "must be 1 or 3");
    }
    let shape = match s.table.get("points") {
        Some(Value::Integer(_)) => s.usize("points").map(|n| if dimension == 3 { [n; 3] } else { [n, 1, 1] }),
        Some(_) => s.f64_list("points").and_then(|v| match v.as_slice() {
            [a, b, c] if [a, b, c].iter().all(|x| x.fract() == 0.0 && **x > 0.0) => {
                Some([*a as usize, *b as usize, *c as usize])
            }
            _ => {
                s.err("points", "expected an integer or three positive integers");
                None
            }
        }),
        None => {
            s.missing("points");
            None
        }
    };
    let spacing = s.f64("spacing");
    if spacing.is_none() && !s.table.contains_key("spacing") {
        s.missing("spacing");
    }
    let mut model = PotentialModel::default();
    if let Some(p) = s.usize("stencil_points") {
        match Stencil::new(p) {
            Ok(st) => model.stencil = st,
            Err(_) => s.err("stencil_points", "must be 3, 5, 7 or 9"),
        }
    }
    if let Some(h) = s.bool("hartree") {
        model.hartree = h;
    }
    if let Some(x) = s.string("xc") {
        match x.as_str() {
            "none" => model.xc = XcKind::None,
            "lda" => model.xc = XcKind::Lda,
            _ => s.err("xc", "expected \"none\" or \"lda\""),
        }
    }
    if let Some(a) = s.f64("softening_ee") {
        model.softening_ee = a;
    }
    if let Some(t) = s.f64("poisson_tol") {
        model.poisson_tol = t;
    }

    let harmonic = s.f64("harmonic_omega");
    let ions = match s.table.remove("ions") {
        Some(Value::Array(list)) => {
            let mut ions = Vec::new();
            for (i, item) in list.into_iter().enumerate() {
                let Value::Table(t) = item else {
                    s.err("ions", "each ion must be a table");
                    continue;
                };
                let mut errs = Vec::new();
                let ion = {
                    let mut is = Section::new("system.ions", t, &mut errs);
                    let position = is.vec3("position");
                    if position.is_none() && !is.has("position") {
                        is.missing("position");
                    }
                    let charge = is.f64("charge").unwrap_or(1.0);
                    let softening = is.f64("softening").unwrap_or(1.0);
                    is.finish();
                    position.map(|position| Ion { position, charge, softening })
                };
                for e in errs {
                    s.errs.push(format!("{e} (ion {i})"));
                }
                ions.extend(ion);
            }
            Some(ions)
        }
        Some(_) => {
            s.err("ions", "expected an array of tables ([[system.ions]])");
            None
        }
        None => None,
    };
    let binding = match (ions, harmonic) {
        (Some(ions), None) => Some(Binding::Ions(ions)),
        (None, Some(w)) if w > 0.0 => Some(Binding::Harmonic(w)),
        (None, Some(_)) => {
            s.err("harmonic_omega", "must be > 0");
            None
        }
        (Some(_), Some(_)) => {
            s.err("ions", "give either ions or harmonic_omega, not both");
            None
        }
        (None, None) => {
            s.errs.push("system needs [[system.ions]] or system.harmonic_omega".into());
            None
        }
    };

    let electrons = s.usize("electrons");
    let occupations = match (s.f64_list("occupations"), electrons) {
        (Some(o), Some(n)) => {
            if (o.iter().sum::<f64>() - n as f64).abs() > 1e-12 {
                s.err("occupations", "must sum to system.electrons");
            }
            Some(o)
        }
        (Some(o), None) => Some(o),
        (None, Some(n)) => Some(aufbau_occupations(n)),
        (None, None) => match &binding {
            Some(Binding::Harmonic(_)) => Some(vec![1.0]),
            Some(Binding::Ions(ions)) => {
                let z: f64 = ions.iter().map(|i| i.charge).sum();
                if z.fract() == 0.0 && z >= 1.0 {
                    Some(aufbau_occupations(z as usize))
                } else {
                    s.err("electrons", "ion charges are not a positive integer; give the electron count");
                    None
                }
            }
            None => None,
        },
    };
    s.finish();
    Some(SystemConfig {
        dimension,
        shape: shape?,
        spacing: spacing?,
        binding: binding?,
        occupations: occupations?,
        model,
    })
}

fn read_cavity(mut s: Section) -> CavityConfig {
    let omega = s.f64("omega").unwrap_or(1.0);
    let n_max = s.usize("n_max").unwrap_or(2);
    let lambda = s.vec3("lambda");
    let strength = s.f64("strength");
    let v_eff = s.f64("v_eff");
    let polarization = s.vec3("polarization");
    let given = [lambda.is_some(), strength.is_some(), v_eff.is_some()].iter().filter(|&&b| b).count();
    if given > 1 {
        s.errs.push("cavity: give only one of lambda, strength or v_eff".into());
    }
    if polarization.is_some() && lambda.is_some() {
        s.err("polarization", "not used together with cavity.lambda");
    }
    if let Some(v) = v_eff {
        if !(v > 0.0) {
            s.err("v_eff", "must be > 0");
        }
    }
    let along = |g: f64| {
        let e = polarization.unwrap_or([1.0, 0.0, 0.0]);
        let n = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        if n > 0.0 {
            [g * e[0] / n, g * e[1] / n, g * e[2] / n]
        } else {
            [f64::NAN; 3]
        }
    };
    let lambda = match (lambda, strength, v_eff) {
        (Some(l), _, _) => l,
        (None, Some(g), _) => along(g),
        (None, None, Some(v)) if v > 0.0 => along(lambda_from_volume(v)),
        _ => [0.0; 3],
    };
    if lambda.iter().any(|x| x.is_nan()) {
        s.err("polarization", "must be non-zero");
    }
    s.finish();
    CavityConfig { omega, lambda, n_max }
}

fn read_scf(mut s: Section) -> ScfConfig {
    let mut c = ScfConfig::default();
    if let Some(v) = s.usize("max_iter") {
        c.max_iter = v;
    }
    if let Some(v) = s.f64("tol_energy") {
        c.tol_energy = v;
    }
    if let Some(v) = s.f64("tol_density") {
        c.tol_density = v;
    }
    if let Some(v) = s.f64("tol_residual") {
        c.tol_residual = Some(v);
    }
    if let Some(v) = s.f64("mixing") {
        c.mixing = v;
    }
    if let Some(v) = s.usize("inner_steps") {
        c.inner_steps = v;
    }
    if let Some(v) = s.string("minimizer") {
        match v.parse::<Minimizer>() {
            Ok(m) => c.minimizer = m,
            Err(_) => s.err("minimizer", "expected steepest-descent, conjugate-gradient or imaginary-time"),
        }
    }
    if let Some(v) = s.f64_list("weights") {
        c.weights = Some(v);
    }
    if let Some(v) = s.f64("seed_width") {
        c.seed_width = Some(v);
    }
    s.finish();
    c
}

fn read_axis(s: &mut Section, key: &str) -> usize {
    let a = s.usize(key).unwrap_or(0);
    if a > 2 {
        s.err(key, "must be 0, 1 or 2");
    }
    a
}

fn read_prop(mut s: Section) -> PropConfig {
    let mut c = PropConfig::default();
    if let Some(v) = s.f64("dt") {
        c.dt = v;
    }
    if let Some(v) = s.usize("steps") {
        c.steps = v;
    }
    if let Some(v) = s.usize("order") {
        c.order = v;
    }
    if let Some(v) = s.usize("stride") {
        c.stride = v;
    }
    let protocol = s.string("protocol").unwrap_or_else(|| "none".into());
    let kick_keys = ["kick_strength", "kick_axis"];
    let laser_keys = ["laser_amplitude", "laser_omega", "laser_envelope_time", "laser_axis"];
    let stray = |s: &mut Section, keys: &[&str], why: &str| {
        for k in keys {
            if s.has(k) {
                s.table.remove(*k);
                s.err(k, why);
            }
        }
    };
    match protocol.as_str() {
        "none" => {
            stray(&mut s, &kick_keys, "only used with protocol = \"kick\"");
            stray(&mut s, &laser_keys, "only used with protocol = \"laser\"");
        }
        "kick" => {
            let strength = s.f64("kick_strength").unwrap_or(0.01);
            let axis = read_axis(&mut s, "kick_axis");
            c.protocol = FieldProtocol::DeltaKick { strength, axis };
            stray(&mut s, &laser_keys, "only used with protocol = \"laser\"");
        }
        "laser" => {
            let amplitude = s.f64("laser_amplitude");
            let omega = s.f64("laser_omega");
            for (k, v) in [("laser_amplitude", amplitude), ("laser_omega", omega)] {
                if v.is_none() && !s.errs.iter().any(|e| e.contains(k)) {
                    s.missing(k);
                }
            }
            let envelope = s.f64("laser_envelope_time");
            let axis = read_axis(&mut s, "laser_axis");
            if let (Some(a), Some(w)) = (amplitude, omega) {
                let pulse = match envelope {
                    Some(t) => LaserPulse::with_envelope(a, w, t),
                    None => LaserPulse::new(a, w),
                };
                match pulse {
                    Ok(mut p) => {
                        p.axis = axis;
                        c.protocol = FieldProtocol::Laser(p);
                    }
                    Err(Error::Config(e)) => s.errs.extend(e.into_iter().map(|m| format!("prop: {m}"))),
                    Err(e) => s.errs.push(format!("prop: {e}")),
                }
            }
            stray(&mut s, &kick_keys, "only used with protocol = \"kick\"");
        }
        _ => s.err("protocol", "expected \"none\", \"kick\" or \"laser\""),
    }
    s.finish();
    c
}

fn read_spectrum(mut s: Section) -> SpectrumConfig {
    let mut c = SpectrumConfig::default();
    if let Some(v) = s.f64("eta") {
        c.eta = Some(v);
    }
    if let Some(v) = s.f64("omega_min") {
        c.omega_min = v;
    }
    if let Some(v) = s.f64("omega_max") {
        c.omega_max = v;
    }
    if let Some(v) = s.f64("d_omega") {
        c.d_omega = v;
    }
    if let Some(v) = s.f64("kick") {
        c.kick = Some(v);
    }
    s.finish();
    c
}

fn read_hhg(mut s: Section) -> HhgConfig {
    let mut c = HhgConfig::default();
    if s.has("axis") {
        c.axis = read_axis(&mut s, "axis");
    }
    if let Some(v) = s.f64("max_order") {
        if !(v > 0.0) {
            s.err("max_order", "must be > 0");
        }
        c.max_order = v;
    }
    if let Some(v) = s.f64("d_order") {
        if !(v > 0.0) {
            s.err("d_order", "must be > 0");
        }
        c.d_order = v;
    }
    if let Some(v) = s.string("window") {
        match v.as_str() {
            "hann" => c.window = Window::Hann,
            "blackman" => c.window = Window::Blackman,
            "none" => c.window = Window::None,
            _ => s.err("window", "expected \"hann\", \"blackman\" or \"none\""),
        }
    }
    s.finish();
    c
}

fn read_oracle(mut s: Section) -> OracleConfig {
    let mut c = OracleConfig::default();
    let mu = s.f64("mu");
    if let Some(f) = s.string("flavor") {
        match f.as_str() {
            "mean-field" => c.flavor = Flavor::MeanFieldMu,
            "frozen" => c.flavor = Flavor::FrozenMu(mu.unwrap_or(0.0)),
            "exact-self-interaction" => c.flavor = Flavor::ExactSelfInteraction,
            _ => s.err("flavor", "expected \"mean-field\", \"frozen\" or \"exact-self-interaction\""),
        }
    }
    if mu.is_some() && !matches!(c.flavor, Flavor::FrozenMu(_)) {
        s.err("mu", "only used with flavor = \"frozen\"");
    }
    if let Some(b) = s.bool("propagate") {
        c.propagate = b;
    }
    if let Some(t) = s.f64("tolerance") {
        if !(t > 0.0) {
            s.err("tolerance", "must be > 0");
        }
        c.tolerance = t;
    }
    s.finish();
    c
}

fn read_output(mut s: Section) -> OutputConfig {
    let mut c = OutputConfig::default();
    if let Some(d) = s.string("dir") {
        c.dir = Some(PathBuf::from(d));
    }
    if let Some(u) = s.string("units") {
        match u.as_str() {
            "atomic" => c.units = Units::Atomic,
            "ev-fs" => c.units = Units::EvFs,
            _ => s.err("units", "expected \"atomic\" or \"ev-fs\""),
        }
    }
    s.finish();
    c
}
