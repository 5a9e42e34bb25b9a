//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hairlab", version, about = "Hairs, gauges and measures for z -> λe^z")]
pub struct Cli {
    /// Map parameter, 0 < λ < 1/e.
    #[arg(long, global = true, default_value_t = 0.25)]
    pub lambda: f64,
    /// Override the real anchor (default β + 1).
    #[arg(long, global = true)]
    pub x0: Option<f64>,
    /// Output directory; receives CSV files, summary.jsonl and config.txt.
    #[arg(long, global = true, default_value = "hairlab-out")]
    pub out: PathBuf,
    /// Flat key=value file supplying defaults for any long flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Attracting and repelling real fixed points.
    FixedPoints,
    /// Build the linearizer and dump its Taylor coefficients.
    Schroeder {
        #[arg(long, default_value_t = 40)]
        coeffs: usize,
    },
    /// Real fractional iterate E^r(x).
    FracIter {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        x: f64,
        /// Also compare E^r(E^r(x)) against E^{2r}(x).
        #[arg(long)]
        twice: bool,
    },
    HairTrace {
        #[command(flatten)]
        it: ItineraryArgs,
        #[arg(long)]
        u_lo: f64,
        #[arg(long)]
        u_hi: f64,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    Endpoint {
        #[command(flatten)]
        it: ItineraryArgs,
        #[arg(long, default_value_t = 40)]
        depth: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Finite-horizon test of E^k(z) staying inside the ψ-tract.
    Membership {
        /// Profile, `lq:ε` (t/ln^ε t) or `frac:ε` (L^ε).
        #[arg(long, default_value = "frac:0.5")]
        psi: String,
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        /// Test the point `re,im`.
        #[arg(long, conflicts_with = "hair_u")]
        z: Option<String>,
        /// Test the hair point at this parameter instead.
        #[arg(long)]
        hair_u: Option<f64>,
        #[command(flatten)]
        it: ItineraryArgs,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        /// On failure, search ε in this comma list for a shifted certificate.
        #[arg(long)]
        eps_grid: Option<String>,
        #[arg(long, default_value_t = 3)]
        max_shift: usize,
    },
    /// Tabulate the growth conditions relating a gauge to a tract profile.
    GaugeCheck {
        #[command(flatten)]
        gauge: GaugeArgs,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value_t = 20.0)]
        t_lo: f64,
        #[arg(long, default_value_t = 1e300)]
        t_hi: f64,
        /// Interpret t-lo/t-hi as bounds on ln t.
        #[arg(long)]
        ln_range: bool,
    },
    CellTree {
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Mass-distribution check of a gauge on the cell tree.
    MeasureCheck {
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long, default_value = "power:1")]
        gauge: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    BoxCount {
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long, default_value = "power:1")]
        gauge: String,
        /// CSV of points (`re,im` columns); default is the tree's cells.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Box sides 2^-k for k in `lo..hi`.
        #[arg(long, default_value = "2..10")]
        scales: String,
    },
    /// Greedy disjoint sub-family with the 4r covering check.
    Vitali {
        /// CSV with `x,y,r` columns.
        #[arg(long, conflicts_with = "random")]
        balls: Option<PathBuf>,
        /// Number of random balls in the unit square.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        r_max: f64,
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
    /// Escape-time image (binary PPM).
    Render {
        #[arg(long, default_value_t = 800)]
        width: usize,
        #[arg(long, default_value_t = 600)]
        height: usize,
        #[arg(long, default_value = "-1,12,-8,8", allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = 40)]
        iter_cap: usize,
        /// hair-trace CSV to draw on top.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(long, default_value = "render.ppm")]
        image: String,
    },
}

#[derive(Debug, Args)]
pub struct ItineraryArgs {
    /// Leading symbols, comma separated.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub prefix: String,
    /// `zeros`, `periodic:a,b,..`, `bounded:B:seed` or `growth:t`.
    #[arg(long, default_value = "zeros", allow_hyphen_values = true)]
    pub tail: String,
}

#[derive(Debug, Args)]
pub struct GaugeArgs {
    /// `power:s`, `logpower:s`, `frac:s` or `fracpow:s:γ`.
    #[arg(long, default_value = "power:1.45")]
    pub gauge: String,
    /// `lq:ε` or `frac:ε`.
    #[arg(long, default_value = "lq:1")]
    pub psi: String,
    /// Which condition: `p`, `p2` or `both`.
    #[arg(long, default_value = "both")]
    pub condition: String,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    #[arg(long, default_value = "frac:0.5")]
    pub psi: String,
    /// Root point `re,im` of the first square.
    #[arg(long, default_value = "6.5,0", allow_hyphen_values = true)]
    pub z0: String,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 100_000)]
    pub max_cells: usize,
}
