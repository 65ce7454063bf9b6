mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Format;

#[derive(Parser, Debug)]
#[command(
    name = "rado",
    version,
    about = "Copies of the Rado graph: orbits, labelings, fusion and strong subtrees"
)]
pub struct Cli {
    /// TOML config file (search_bound, backtrack_budget, format, [depth_caps]).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Vertices a witness search may examine.
    #[arg(long, global = true)]
    pub search_bound: Option<usize>,
    /// Placement budget of the greedy search.
    #[arg(long, global = true)]
    pub backtrack_budget: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Adjacency of two vertices (exit 0 if adjacent, 1 if not).
    Adj { u: u64, v: u64 },
    /// Orbit queries on JSON orbit types {"H":[…],"K":[…]}.
    #[command(subcommand)]
    Orbit(OrbitCmd),
    /// Extension-property check over the first vertices of a copy.
    Verify {
        #[command(flatten)]
        copy: CopyArgs,
        #[arg(long, default_value_t = 3)]
        pattern_depth: usize,
    },
    /// The standard labeling of a copy.
    Label {
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        variant: usize,
        #[command(flatten)]
        copy: CopyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The tree order of the ambient labeling.
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Back-and-forth between ({p},{p}) and ({p},∅).
    Iso {
        #[command(flatten)]
        iso: IsoArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Constructions on the extendible base copy.
    #[command(subcommand)]
    Copy(CopyCmd),
    /// Fuse a declarative oracle into a labeling.
    Fuse {
        /// Oracle spec JSON: {"value": "card_K" | "const:N" | …, "refine": "all" | "mod:M:R" | […]}.
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        copy: CopyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read the table value along the branch of a predicate.
    Readoff {
        fusion: PathBuf,
        #[arg(long)]
        pred: String,
        #[arg(long)]
        n: usize,
    },
    /// Value sets per level of a fusion table.
    Slalom { fusion: PathBuf },
    /// Search a monochromatic strong subtree (exit 1 if there is none).
    Hl {
        /// {"parent": [null, 0, …]}.
        #[arg(long)]
        tree: PathBuf,
        /// A JSON array with one color per node.
        #[arg(long)]
        colors: PathBuf,
        #[arg(long)]
        height: usize,
    },
    /// Monochromatic extraction from a 0/1 fusion table.
    Unsplit {
        fusion: PathBuf,
        #[arg(long)]
        height: usize,
    },
    /// Whether a copy is certified to decide vertex P.
    Decided {
        p: u64,
        #[command(flatten)]
        copy: CopyArgs,
    },
    /// A pivot a copy leaves undecided, against a claimed real.
    Counterexample {
        #[arg(long)]
        pred: String,
        #[command(flatten)]
        copy: CopyArgs,
    },
    /// Greedy monochromatic copy for the coloring v ↦ v mod COLORS.
    Greedy {
        #[arg(long)]
        colors: usize,
        #[arg(long)]
        depth: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum OrbitCmd {
    /// Exit 0 if V is in the orbit.
    Member { v: u64, orbit: String },
    /// Least member at or above --from.
    Least {
        orbit: String,
        #[arg(long, default_value_t = 0)]
        from: u64,
        #[command(flatten)]
        copy: CopyArgs,
    },
    /// Closed-form member above --above.
    Witness {
        orbit: String,
        #[arg(long, default_value_t = 0)]
        above: u64,
    },
    /// The orbit of the common members, or null.
    Intersect { a: String, b: String },
    /// Exit 0 if A ⊆ B.
    Subset { a: String, b: String },
    /// Exit 0 if A = B.
    Equal { a: String, b: String },
}

#[derive(Subcommand, Debug)]
pub enum TreeCmd {
    /// DOT rendering of levels 0..=DEPTH.
    Dot {
        #[arg(long)]
        depth: usize,
    },
    /// Immediate predecessors of (N, K).
    Preds { n: usize, k: String },
    /// The orbit whose members are the down-set of (N, K).
    Downset { n: usize, k: String },
}

#[derive(Subcommand, Debug)]
pub enum CopyCmd {
    /// Run the splitting recursion on the extendible base.
    Split {
        #[command(flatten)]
        iso: IsoArgs,
        #[arg(long)]
        rounds: usize,
        /// Generated levels of the base.
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
}

#[derive(Args, Debug)]
pub struct IsoArgs {
    #[arg(long, default_value_t = 0)]
    pub pivot: u64,
    #[arg(long, default_value_t = 0)]
    pub steps: usize,
    #[arg(long, value_enum, default_value = "domain-first")]
    pub schedule: ScheduleArg,
    /// JSON array F ⊆ ({p},{p}) kept out of the preimage of G.
    #[arg(long, default_value = "[]")]
    pub avoid_f: String,
    #[arg(long, default_value = "[]")]
    pub avoid_g: String,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy)]
pub enum ScheduleArg {
    DomainFirst,
    RangeFirst,
}

/// Selects the copy to work in; the ambient graph by default.
#[derive(Args, Debug, Default)]
pub struct CopyArgs {
    /// Restrict to an orbit type (JSON).
    #[arg(long)]
    pub within_orbit: Option<String>,
    /// Restrict to a predicate such as even, mod:3:1, below:50.
    #[arg(long)]
    pub within: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(rado_core::Error),
}

impl From<rado_core::Error> for CliError {
    fn from(e: rado_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Core(e) => e.kind(),
        }
    }

    fn exit_code(&self) -> u8 {
        use rado_core::Error::*;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(SearchExhausted { .. } | NoSubtreeFound { .. }) => 3,
            CliError::Core(PreconditionViolation(_) | OracleInconsistency { .. }) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

fn report(e: &CliError) -> ExitCode {
    let obj = serde_json::json!({ "error": e.kind(), "message": e.message() });
    let _ = writeln!(std::io::stderr(), "{obj}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::Usage(e.render().to_string().trim().to_string())),
    };
    let mut out = std::io::stdout().lock();
    match commands::run(cli, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(e) => report(&e),
    }
}
