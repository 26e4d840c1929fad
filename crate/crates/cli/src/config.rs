//! Run configuration shared by the commands, plus the mapping from library
//! errors to process exit codes.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use dantzig_lab::circuit::{compile_turing_machine, library, BitString, Circuit, CircuitError, TuringMachine};
use dantzig_lab::construction::{AlphaMode, ConstructionError, Overrides, WMode};
use dantzig_lab::lp::LpError;
use dantzig_lab::mdp::{default_budget, MdpError, PiOptions, TieBreak};
use dantzig_lab::verify::VerifyError;
use dantzig_lab::Rational;

/// Failure classes, one per non-verdict exit code.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Budget(String),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Budget(m) => write!(f, "budget exhausted: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violation: {m}"),
        }
    }
}

impl From<MdpError> for CliError {
    fn from(e: MdpError) -> Self {
        match e {
            MdpError::IterationBudgetExceeded { .. } => CliError::Budget(e.to_string()),
            MdpError::UnknownState(_) | MdpError::InvalidPolicy(_) | MdpError::Malformed(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ConstructionError> for CliError {
    fn from(e: ConstructionError) -> Self {
        match e {
            ConstructionError::Mdp(inner) => inner.into(),
            ConstructionError::Circuit(inner) => inner.into(),
            ConstructionError::InvalidParameter(_)
            | ConstructionError::LengthMismatch { .. }
            | ConstructionError::NotNormalized => CliError::Input(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<LpError> for CliError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Mdp(inner) => inner.into(),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Mdp(inner) => inner.into(),
            VerifyError::Construction(inner) => inner.into(),
            VerifyError::Circuit(inner) => inner.into(),
            VerifyError::Lp(inner) => inner.into(),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Invariant(format!("serialization failed: {e}"))
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Tie-break rule (lowest, highest or seeded:N).
    #[arg(long, global = true, default_value = "lowest", value_parser = parse_tie)]
    pub tie: TieBreak,
    /// Clock probability exponent: calibrated or printed.
    #[arg(long, global = true, default_value = "calibrated", value_parser = parse_alpha)]
    pub alpha: AlphaMode,
    /// Stage-three threshold numerator, as an exact fraction.
    #[arg(long, global = true, value_parser = parse_rational)]
    pub bl: Option<Rational>,
    /// Stage-four threshold numerator, as an exact fraction.
    #[arg(long, global = true, value_parser = parse_rational)]
    pub ro: Option<Rational>,
    /// Residual appeal bound, as an exact fraction.
    #[arg(long, global = true, value_parser = parse_rational)]
    pub magic: Option<Rational>,
    /// Weight of the terminal gadget of Const(C, z): exact or bound.
    #[arg(long = "w-mode", global = true, default_value = "exact", value_parser = parse_w_mode)]
    pub w_mode: WMode,
    /// Maximum number of switches (default 10 · 2^n · |S|).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: Option<u64>,
    /// Directory (build, run) or file (verify, decide) for machine-readable output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_tie(s: &str) -> Result<TieBreak, String> {
    s.parse().map_err(|e: MdpError| e.to_string())
}

fn parse_alpha(s: &str) -> Result<AlphaMode, String> {
    s.parse().map_err(|e: ConstructionError| e.to_string())
}

fn parse_w_mode(s: &str) -> Result<WMode, String> {
    s.parse().map_err(|e: ConstructionError| e.to_string())
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    s.parse().map_err(|e: dantzig_lab::numerics::NumericsError| e.to_string())
}

impl RunConfig {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            alpha: self.alpha,
            bl: self.bl.clone(),
            ro: self.ro.clone(),
            magic: self.magic.clone(),
            ..Overrides::default()
        }
    }

    pub fn pi(&self, n: usize, states: usize) -> PiOptions {
        let budget = self.budget.map(|b| b as usize).unwrap_or_else(|| default_budget(n, states));
        PiOptions::new(self.tie, budget)
    }
}

/// A problem instance named on the command line.
#[derive(Debug, Clone)]
pub enum Instance {
    /// The standalone `n`-bit clock.
    Clock(usize),
    /// A circuit for `F`, with the input and bit index a Turing machine
    /// compilation fixes.
    Function { f: Circuit, input: Option<BitString>, z: Option<usize> },
}

impl Instance {
    pub fn load(source: &str) -> Result<Instance, CliError> {
        if let Some(n) = source.strip_prefix("clock:n=") {
            let n: usize = n.parse().map_err(|_| CliError::Input(format!("bad clock size in '{source}'")))?;
            if n == 0 || n > 30 {
                return Err(CliError::Input(format!("clock size must be in 1..=30, got {n}")));
            }
            return Ok(Instance::Clock(n));
        }
        let path = Path::new(source);
        if path.is_file() {
            return Self::from_file(path);
        }
        match library::builtin(source) {
            Ok(f) => Ok(Instance::Function { f, input: None, z: None }),
            Err(_) => Err(CliError::Input(format!(
                "'{source}' is neither a file nor a builtin (clock:n=K, {})",
                library::BUILTIN_NAMES.join(", ")
            ))),
        }
    }

    fn from_file(path: &Path) -> Result<Instance, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if doc.get("transitions").is_some() {
            let tm = TuringMachine::from_json(&text)?;
            let input: Vec<bool> = tm.input.as_ref().map(|b| b.iter().collect()).unwrap_or_default();
            let (f, b, z) = compile_turing_machine(&tm, &input, tm.space_bound)?;
            return Ok(Instance::Function { f, input: Some(b), z: Some(z) });
        }
        Ok(Instance::Function { f: Circuit::from_json(&text)?, input: None, z: None })
    }

    pub fn n(&self) -> usize {
        match self {
            Instance::Clock(n) => *n,
            Instance::Function { f, .. } => f.n(),
        }
    }

    /// The circuit for `F`, or an input error for a clock instance.
    pub fn function(&self) -> Result<&Circuit, CliError> {
        match self {
            Instance::Function { f, .. } => Ok(f),
            Instance::Clock(_) => Err(CliError::Input("this command needs a circuit instance, not a clock".into())),
        }
    }

    /// The input `B`: the flag if given, else the compiled one, else all ones.
    pub fn input(&self, flag: Option<&str>) -> Result<BitString, CliError> {
        let n = self.n();
        let b = match (flag, self) {
            (Some(text), _) => text.parse::<BitString>().map_err(|e| CliError::Input(e.to_string()))?,
            (None, Instance::Function { input: Some(b), .. }) => b.clone(),
            (None, _) => BitString::new(vec![true; n]),
        };
        if b.len() != n {
            return Err(CliError::Input(format!("input has {} bits, instance has {n}", b.len())));
        }
        Ok(b)
    }

    /// The bit index `z`: the flag if given, else the compiled one, else 1.
    pub fn z(&self, flag: Option<usize>) -> Result<usize, CliError> {
        let z = match (flag, self) {
            (Some(z), _) => z,
            (None, Instance::Function { z: Some(z), .. }) => *z,
            (None, _) => 1,
        };
        if z == 0 || z > self.n() {
            return Err(CliError::Input(format!("bit index {z} outside 1..={}", self.n())));
        }
        Ok(z)
    }
}
