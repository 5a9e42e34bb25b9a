use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use hairlab::dynamics::fixed_point_residual;
use hairlab::gauge::{check_condp, check_condp2, GaugeProfile, GaugeSpec, ScaleRange};
use hairlab::hairs::{
    estimate_endpoint, find_certificate, forward_orbit, in_x_orbit, trace_hair, trace_hair_point, Itinerary,
    Tail, Verdict,
};
use hairlab::measure::{
    build_cell_tree, check_ku_inequalities, gauge_box_count, mass_distribution_check, verify_four_r_cover,
    vitali_select, Ball, CellTree,
};
use hairlab::par::Exec;
use hairlab::render::{overlay_points, render_escape, RenderConfig, Window};
use hairlab::schroeder::{build_schroeder, SchroederFn};
use hairlab::tower::fmt_g17;
use hairlab::{Error, Params, RealDominantComplex, Result, TowerReal, VERSION};

use crate::args::{Cli, Cmd, GaugeArgs, ItineraryArgs, TreeArgs};

const SCHROEDER_COEFFS: usize = 40;

/// Output directory with the config echo and a JSON-lines summary.
pub struct Output {
    dir: PathBuf,
    summary: String,
}

impl Output {
    pub fn create(dir: &Path, argv: &[String], cli: &Cli) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut echo = format!("version = {VERSION}\nargv = {}\n", argv[1..].join(" "));
        let _ = writeln!(
            echo,
            "lambda = {}\nx0 = {:?}\nout = {}",
            cli.lambda,
            cli.x0,
            dir.display()
        );
        let _ = writeln!(echo, "command = {:?}", cli.cmd);
        std::fs::write(dir.join("config.txt"), echo)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            summary: String::new(),
        })
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        Ok(path)
    }

    fn record(&mut self, v: Value) {
        let line = v.to_string();
        println!("{line}");
        self.summary.push_str(&line);
        self.summary.push('\n');
    }

    pub fn finish(self) -> Result<()> {
        self.write("summary.jsonl", &self.summary).map(|_| ())
    }
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| domain(format!("{what}: cannot parse '{s}'")))
}

fn list(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| num(t, "symbol"))
        .collect()
}

fn parse_complex(s: &str) -> Result<Complex64> {
    match s.split_once(',') {
        Some((a, b)) => Ok(Complex64::new(num(a, "re")?, num(b, "im")?)),
        None => Err(domain(format!("point '{s}' must be re,im"))),
    }
}

fn parse_tail(s: &str) -> Result<Tail> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "zeros" => Ok(Tail::Periodic(vec![0])),
        "periodic" => Ok(Tail::Periodic(list(rest)?)),
        "bounded" => {
            let (b, seed) = rest.split_once(':').unwrap_or((rest, "0"));
            Ok(Tail::Bounded {
                bound: num(b, "bound")?,
                seed: num(seed, "seed")?,
            })
        }
        "growth" => Ok(Tail::Growth(num(rest, "growth")?)),
        _ => Err(domain(format!("unknown tail '{s}'"))),
    }
}

fn itinerary(a: &ItineraryArgs) -> Result<Itinerary> {
    Itinerary::new(list(&a.prefix)?, parse_tail(&a.tail)?)
}

/// Lazily built linearizer shared by gauges and profiles.
struct Ctx {
    p: Params,
    schroeder: Option<Arc<SchroederFn>>,
}

impl Ctx {
    fn schroeder(&mut self) -> Result<Arc<SchroederFn>> {
        if self.schroeder.is_none() {
            self.schroeder = Some(Arc::new(build_schroeder(&self.p, SCHROEDER_COEFFS)?));
        }
        Ok(self.schroeder.clone().expect("just built"))
    }

    fn gauge(&mut self, s: &str) -> Result<GaugeSpec> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts[..] {
            ["power", a] => Ok(GaugeSpec::power(num(a, "gauge")?)),
            ["logpower", a] => Ok(GaugeSpec::log_power(num(a, "gauge")?)),
            ["frac", a] => Ok(GaugeSpec::frac_iter(num(a, "gauge")?, self.schroeder()?)),
            ["fracpow", a, g] => Ok(GaugeSpec::frac_iter_pow(
                num(a, "gauge")?,
                num(g, "gauge")?,
                self.schroeder()?,
            )),
            _ => Err(domain(format!("unknown gauge '{s}'"))),
        }
    }

    fn profile(&mut self, s: &str) -> Result<GaugeProfile> {
        let (kind, eps) = s
            .split_once(':')
            .ok_or_else(|| domain(format!("profile '{s}' must be kind:ε")))?;
        let eps: f64 = num(eps, "ε")?;
        if !(eps > 0.0) {
            return Err(domain("profile ε must be positive"));
        }
        match kind {
            "lq" => Ok(GaugeProfile::log_quotient(&self.p, eps)),
            "frac" => Ok(GaugeProfile::frac_iter(eps, self.schroeder()?)),
            _ => Err(domain(format!("unknown profile '{s}'"))),
        }
    }

    fn tree(&mut self, a: &TreeArgs) -> Result<CellTree> {
        let psi = self.profile(&a.psi)?;
        build_cell_tree(
            &self.p,
            &psi,
            parse_complex(&a.z0)?,
            a.depth,
            a.max_cells,
            Exec::default(),
        )
    }
}

fn verdict_json(v: &Verdict) -> Value {
    match v {
        Verdict::In { horizon } => json!({"verdict": "IN", "horizon": horizon}),
        Verdict::Out { k, reason } => json!({"verdict": "OUT", "k": k, "reason": reason}),
    }
}

/// Reads two numeric columns from a CSV with a header; `names` are tried
/// in order and the first two columns are used otherwise.
fn read_columns(path: &Path, names: &[(&str, &str)], extra: Option<&str>) -> Result<Vec<Vec<f64>>> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(io)?;
    let header = rdr.headers().map_err(io)?.clone();
    let pos = |n: &str| header.iter().position(|h| h == n);
    let (ia, ib) = names
        .iter()
        .find_map(|(a, b)| Some((pos(a)?, pos(b)?)))
        .unwrap_or((0, 1));
    let mut idx = vec![ia, ib];
    if let Some(e) = extra {
        idx.push(pos(e).ok_or_else(|| domain(format!("{}: missing column '{e}'", path.display())))?);
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(io)?;
        let row = idx
            .iter()
            .map(|&j| {
                rec.get(j)
                    .ok_or_else(|| domain(format!("row {}: too few columns", i + 2)))
                    .and_then(|c| num::<f64>(c, "csv value"))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn run(cli: &Cli, out: &mut Output) -> Result<()> {
    let mut p = Params::new(cli.lambda)?;
    if let Some(x0) = cli.x0 {
        p = p.with_x0(x0)?;
    }
    let mut ctx = Ctx { p, schroeder: None };
    match &cli.cmd {
        Cmd::FixedPoints => {
            let (ra, rb) = (
                fixed_point_residual(&p, p.alpha),
                fixed_point_residual(&p, p.beta),
            );
            let csv = format!(
                "lambda,alpha,beta,residual_alpha,residual_beta\n{},{},{},{},{}\n",
                fmt_g17(p.lambda),
                fmt_g17(p.alpha),
                fmt_g17(p.beta),
                fmt_g17(ra),
                fmt_g17(rb)
            );
            out.write("fixed_points.csv", csv)?;
            out.record(json!({"command": "fixed-points", "alpha": p.alpha, "beta": p.beta, "x0": p.x0}));
        }
        Cmd::Schroeder { coeffs } => {
            let f = build_schroeder(&p, *coeffs)?;
            out.write("schroeder_coeffs.csv", f.coeffs_csv())?;
            out.record(
                json!({"command": "schroeder", "coeffs": coeffs, "radius": f.radius,
                "limit_depth": f.limit_depth, "residual": f.residual}),
            );
        }
        Cmd::FracIter { r, x, twice } => {
            let f = ctx.schroeder()?;
            let xt = TowerReal::from_f64(&p, *x);
            let once = f.frac_iter(*r, &xt)?;
            let mut csv = format!(
                "r,x,level,mantissa\n{},{},{},{}\n",
                fmt_g17(*r),
                fmt_g17(*x),
                once.level,
                fmt_g17(once.mantissa)
            );
            let mut rec = json!({"command": "frac-iter", "r": r, "x": x, "value": once.to_string()});
            if *twice {
                let two = f.frac_iter(*r, &once)?;
                let full = f.frac_iter(2.0 * r, &xt)?;
                let rel = f.rel_diff(&two, &full);
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    fmt_g17(2.0 * r),
                    fmt_g17(*x),
                    full.level,
                    fmt_g17(full.mantissa)
                );
                rec["twice"] = json!(two.to_string());
                rec["full"] = json!(full.to_string());
                rec["rel_diff"] = json!(rel);
            }
            out.write("frac_iter.csv", csv)?;
            out.record(rec);
        }
        Cmd::HairTrace {
            it,
            u_lo,
            u_hi,
            depth,
            samples,
        } => {
            let s = itinerary(it)?;
            let tr = trace_hair(&p, &s, *u_lo, *u_hi, *depth, *samples, Exec::default())?;
            out.write("hair.csv", tr.to_csv(&p))?;
            let max_gap = tr.gaps.iter().cloned().fold(0.0, f64::max);
            out.record(json!({"command": "hair-trace", "points": tr.points.len(), "max_gap": max_gap}));
        }
        Cmd::Endpoint { it, depth, tol } => {
            let s = itinerary(it)?;
            let e = estimate_endpoint(&p, &s, *depth, *tol)?;
            let csv = format!(
                "re,im,error_bound\n{},{},{}\n",
                fmt_g17(e.value.re),
                fmt_g17(e.value.im),
                fmt_g17(e.error_bound)
            );
            out.write("endpoint.csv", csv)?;
            out.record(json!({"command": "endpoint", "re": e.value.re, "im": e.value.im,
                "error_bound": e.error_bound, "estimate": "numerical"}));
        }
        Cmd::Membership {
            psi,
            k_max,
            z,
            hair_u,
            it,
            depth,
            eps_grid,
            max_shift,
        } => {
            if *k_max == 0 {
                return Err(domain("k-max must be at least 1"));
            }
            let prof = ctx.profile(psi)?;
            let len = k_max + 1 + max_shift;
            let orbit = match (z, hair_u) {
                (Some(z), _) => {
                    forward_orbit(&p, &RealDominantComplex::from_complex(&p, parse_complex(z)?), len)
                }
                (None, Some(u)) => {
                    let h = trace_hair_point(&p, &itinerary(it)?, *u, *depth)?;
                    h.orbit(&p, len)
                }
                (None, None) => return Err(domain("membership needs --z or --hair-u")),
            };
            let v = in_x_orbit(&p, &prof, &orbit, *k_max);
            let mut rec = json!({"command": "membership", "k_max": k_max});
            rec["result"] = verdict_json(&v);
            if let (false, Some(grid)) = (v.is_in(), eps_grid) {
                let grid = grid
                    .split(',')
                    .map(|t| num(t, "eps"))
                    .collect::<Result<Vec<f64>>>()?;
                let cert = find_certificate(&p, &ctx.schroeder()?, &orbit, &grid, *max_shift, *k_max);
                rec["certificate"] = cert.map_or(Value::Null, |c| json!({"eps": c.eps, "shift": c.shift}));
            }
            out.record(rec);
        }
        Cmd::GaugeCheck {
            gauge:
                GaugeArgs {
                    gauge,
                    psi,
                    condition,
                },
            delta,
            t_lo,
            t_hi,
            ln_range,
        } => {
            let g = ctx.gauge(gauge)?;
            let prof = ctx.profile(psi)?;
            if !(t_lo < t_hi) || !(*t_lo > 1.0) {
                return Err(domain("need 1 < t-lo < t-hi"));
            }
            let range = if *ln_range {
                ScaleRange::LnT(*t_lo, *t_hi)
            } else {
                ScaleRange::T(*t_lo, *t_hi)
            };
            let which: &[&str] = match condition.as_str() {
                "p" => &["p"],
                "p2" => &["p2"],
                "both" => &["p", "p2"],
                c => return Err(domain(format!("unknown condition '{c}'"))),
            };
            for c in which {
                let r = if *c == "p" {
                    check_condp(&g, &prof, *delta, range)
                } else {
                    check_condp2(&g, &prof, *delta, range)
                };
                out.write(&format!("cond{c}.csv"), r.to_csv(&p))?;
                out.record(json!({"command": "gauge-check", "condition": c,
                    "holds_everywhere": r.holds_everywhere, "first_failure_ln_t": r.first_failure,
                    "threshold_ln_t": r.threshold}));
            }
        }
        Cmd::CellTree { tree } => {
            let t = ctx.tree(tree)?;
            out.write("cells.csv", t.to_csv())?;
            let sizes: Vec<usize> = t.levels.iter().map(Vec::len).collect();
            let mut rec = json!({"command": "cell-tree", "level_sizes": sizes});
            if t.depth() >= 2 {
                let ku = check_ku_inequalities(&t)?;
                rec["finite"] = json!(ku.finite);
                rec["levels"] = ku
                    .levels
                    .iter()
                    .map(|l| json!({"depth": l.depth, "eta": l.eta, "m": l.m, "c1_min": l.c1_min, "c1_max": l.c1_max}))
                    .collect();
            }
            out.record(rec);
        }
        Cmd::MeasureCheck { tree, gauge, samples } => {
            let g = ctx.gauge(gauge)?;
            let t = ctx.tree(tree)?;
            let r = mass_distribution_check(&t, &g, *samples)?;
            out.write("mass.csv", r.to_csv())?;
            out.record(
                json!({"command": "measure-check", "verdict": format!("{:?}", r.verdict),
                "trend": r.trend, "increasing": r.increasing}),
            );
        }
        Cmd::BoxCount {
            tree,
            gauge,
            points,
            scales,
        } => {
            let g = ctx.gauge(gauge)?;
            let pts: Vec<Complex64> = match points {
                Some(path) => read_columns(
                    path,
                    &[("re", "im"), ("center_re", "center_im"), ("x", "y")],
                    None,
                )?
                .into_iter()
                .map(|r| Complex64::new(r[0], r[1]))
                .collect(),
                None => {
                    let t = ctx.tree(tree)?;
                    t.rep_points(t.depth())
                }
            };
            let (lo, hi) = scales
                .split_once("..")
                .ok_or_else(|| domain("scales must be lo..hi"))?;
            let (lo, hi): (i32, i32) = (num(lo, "scales")?, num(hi, "scales")?);
            let deltas: Vec<f64> = (lo..hi).map(|k| 2f64.powi(-k)).collect();
            let b = gauge_box_count(&pts, &g, &deltas)?;
            let mut csv = String::from("delta,count,curve\n");
            for i in 0..b.scales.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    fmt_g17(b.scales[i]),
                    b.counts[i],
                    fmt_g17(b.curve[i])
                );
            }
            out.write("boxcount.csv", csv)?;
            out.record(
                json!({"command": "box-count", "points": pts.len(), "dimension": b.dimension,
                "std_err": b.std_err, "band": [b.band.0, b.band.1]}),
            );
        }
        Cmd::Vitali {
            balls,
            random,
            seed,
            r_max,
            grid,
        } => {
            let family: Vec<Ball> = match (balls, random) {
                (Some(path), _) => read_columns(path, &[("x", "y")], Some("r"))?
                    .into_iter()
                    .map(|r| Ball::new(Complex64::new(r[0], r[1]), r[2]))
                    .collect(),
                (None, Some(n)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    (0..*n)
                        .map(|_| {
                            let c = Complex64::new(rng.gen(), rng.gen());
                            Ball::new(c, rng.gen_range(0.0..*r_max) + 1e-6)
                        })
                        .collect()
                }
                (None, None) => return Err(domain("vitali needs --balls or --random")),
            };
            let sel = vitali_select(&family)?;
            let covered = verify_four_r_cover(&family, &sel, *grid);
            let mut csv = String::from("index,x,y,r\n");
            for &i in &sel {
                let b = &family[i];
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    i,
                    fmt_g17(b.center.re),
                    fmt_g17(b.center.im),
                    fmt_g17(b.radius)
                );
            }
            out.write("vitali.csv", csv)?;
            out.record(json!({"command": "vitali", "balls": family.len(), "selected": sel.len(), "four_r_cover": covered}));
        }
        Cmd::Render {
            width,
            height,
            window,
            iter_cap,
            overlay,
            image,
        } => {
            let window: Window = window.parse()?;
            let cfg = RenderConfig {
                window,
                width: *width,
                height: *height,
                iter_cap: *iter_cap,
            };
            let mut img = render_escape(&p, &cfg, Exec::default())?;
            let mut drawn = 0;
            if let Some(path) = overlay {
                let pts: Vec<Complex64> = read_columns(path, &[("re", "im")], None)?
                    .into_iter()
                    .map(|r| Complex64::new(r[0], r[1]))
                    .collect();
                drawn = overlay_points(&mut img, &cfg, &pts);
            }
            let path = out.write(image, img.to_ppm())?;
            out.record(json!({"command": "render", "image": path.display().to_string(),
                "width": width, "height": height, "overlay_points": drawn}));
        }
    }
    Ok(())
}
