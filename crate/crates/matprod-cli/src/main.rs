use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use matprod::bernoulli::{word_segmentation, N0};
use matprod::experiments::{
    bistochastic_chain, divergence_3x3, monte_carlo, track_chain, trials_csv, triangular_2x2, triangular_2x2_engine, CMat,
    Ensemble,
};
use matprod::limit::{analyze, check_condition_c, search_segmentation, uniform_segmentation, LimitConfig};
use matprod::linalg::{FloatMat, Scalar};
use matprod::multifractal::{alpha_grid, legendre, q_grid, spectrum_csv, tau_scale_estimate, MAX_GENERATION};
use matprod::spec::{format_rational, load_spec, System};
use matprod::triangular::{triangular_form, TriangularConfig, TriangularForm};
use matprod::Error;

#[derive(Parser)]
#[command(name = "matprod", version, about = "Asymptotics of products of nonnegative matrices")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check condition (C) and estimate the limit directions of P_nV/|P_nV|.
    Analyze {
        spec: PathBuf,
        /// `auto`, `words` (Bernoulli only), `uniform:K`, `search:MAX` or a list `0,4,9,…`.
        #[arg(long, default_value = "auto")]
        segmentation: String,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Block-triangular form of the tail products.
    Triangularize {
        spec: PathBuf,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L^q spectrum estimate of the Bernoulli measure and its Legendre transform.
    Spectrum {
        #[arg(long, default_value_t = 12)]
        generation: u32,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        qmin: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        qmax: f64,
        #[arg(long, default_value_t = 0.25)]
        qstep: f64,
        #[arg(long, default_value_t = 41)]
        alpha_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Worked examples: bistochastic, div3x3, tri2x2, montecarlo.
    Experiments {
        name: String,
        /// Chain length (bistochastic, tri2x2, montecarlo).
        #[arg(long)]
        n: Option<usize>,
        /// Checkpoint index (div3x3).
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long, default_value = "gaussian-complex")]
        ensemble: String,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Constant coefficients `a,c,d` (tri2x2).
        #[arg(long, default_value = "1,1,1")]
        coeffs: String,
        /// Starting vector `V(1),V(2)` (tri2x2).
        #[arg(long, default_value = "1,1")]
        v: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit 1: the analysis ran but failed; exit 2: bad input.
enum Failure {
    Analytic(String, Option<String>),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Invalid(_) | Error::Dimension(_) => Failure::Input(e.to_string()),
            e => Failure::Analytic(e.to_string(), None),
        }
    }
}

type CmdResult = Result<String, Failure>;

fn read_system(path: &PathBuf) -> Result<System, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    load_spec(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    s.split(',').map(|x| x.trim().parse().map_err(|_| Failure::Input(format!("bad {what}: {s:?}")))).collect()
}

/// Bumped whenever a field of the JSON output changes meaning or disappears.
const SCHEMA_VERSION: u32 = 1;

fn pretty(v: &Value) -> String {
    let mut v = v.clone();
    if let Some(obj) = v.as_object_mut() {
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    let mut s = serde_json::to_string_pretty(&v).unwrap();
    s.push('\n');
    s
}

fn segmentation_for(sys: &System, seq: &[FloatMat], rule: &str) -> Result<Vec<usize>, Failure> {
    let horizon = seq.len();
    let words = |sys: &System| sys.bernoulli_omega(horizon).map(|om| word_segmentation(&om, horizon, N0));
    Ok(match rule {
        "auto" => match words(sys) {
            Some(s) => s,
            None => search_segmentation(seq, 32).unwrap_or_else(|| uniform_segmentation(1, horizon)),
        },
        "words" => words(sys).ok_or_else(|| Failure::Input("`words` segmentation needs the Bernoulli generator".into()))?,
        r => {
            if let Some(k) = r.strip_prefix("uniform:") {
                uniform_segmentation(k.parse().map_err(|_| Failure::Input(format!("bad step in {r:?}")))?, horizon)
            } else if let Some(m) = r.strip_prefix("search:") {
                let m = m.parse().map_err(|_| Failure::Input(format!("bad bound in {r:?}")))?;
                search_segmentation(seq, m).unwrap_or_else(|| uniform_segmentation(1, horizon))
            } else {
                parse_list(r, "segmentation")?
            }
        }
    })
}

fn cmd_analyze(spec: &PathBuf, segmentation: &str, horizon: usize) -> CmdResult {
    let sys = read_system(spec)?;
    let seq = sys.float_sequence(horizon);
    if seq.len() < 2 {
        return Err(Failure::Input(format!("sequence has {} factors; need at least 2", seq.len())));
    }
    let seg = segmentation_for(&sys, &seq, segmentation)?;
    let condition = check_condition_c(&seq, &seg)?;
    if !condition.holds {
        let out = pretty(&json!({ "condition": condition, "report": null }));
        return Err(Failure::Analytic("condition (C) fails on the window".into(), Some(out)));
    }
    let analysis = analyze(&seq, &seg, &LimitConfig::default())?;
    let report = &analysis.report;
    let out = pretty(&json!({ "condition": report.condition, "report": report }));
    if !report.converged {
        return Err(Failure::Analytic(format!("unconverged: certificate {:e}", report.cauchy_defect), Some(out)));
    }
    Ok(out)
}

fn form_json<T: Scalar>(tf: &TriangularForm<T>) -> Value {
    let tk: Vec<Vec<Vec<f64>>> = tf.tk.iter().map(|m| m.to_float().rows()).collect();
    json!({
        "stabilized": tf.stabilized,
        "kappa": tf.kappa,
        "r": tf.r,
        "r0": tf.r0,
        "rk": tf.rk,
        "cuts": tf.cuts,
        "S": tf.s.sigma,
        "S_is_identity": tf.s.is_identity(),
        "T_k": tk,
    })
}

fn cmd_triangularize(spec: &PathBuf, horizon: usize) -> CmdResult {
    let sys = read_system(spec)?;
    let seq = sys.float_sequence(horizon);
    if seq.is_empty() {
        return Err(Failure::Input("empty sequence".into()));
    }
    let cfg = TriangularConfig::default();
    let tf = match sys.exact_sequence(horizon) {
        Some(ex) => triangular_form(&ex, &cfg).map(|tf| form_json(&tf)),
        None => triangular_form(&seq, &cfg).map(|tf| form_json(&tf)),
    };
    match tf {
        Ok(v) if v["stabilized"] == json!(true) => Ok(pretty(&v)),
        Ok(v) => Err(Failure::Analytic("support pattern did not stabilize on the window".into(), Some(pretty(&v)))),
        Err(e @ Error::Unstabilized(_)) => {
            let partial = pretty(&json!({ "stabilized": false, "horizon": seq.len(), "error": e.to_string() }));
            Err(Failure::Analytic(e.to_string(), Some(partial)))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_spectrum(generation: u32, qmin: f64, qmax: f64, qstep: f64, alpha_points: usize) -> CmdResult {
    if generation == 0 || generation > MAX_GENERATION {
        return Err(Failure::Input(format!("generation must be in 1..={MAX_GENERATION}")));
    }
    if !(qstep > 0.0) || qmax < qmin {
        return Err(Failure::Input("need qstep > 0 and qmin ≤ qmax".into()));
    }
    let est = tau_scale_estimate(&q_grid(qmin, qmax, qstep), generation)?;
    let curve = legendre(&est.q_grid, &est.tau, &alpha_grid(&est, alpha_points))?;
    Ok(spectrum_csv(&est, &curve))
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiments(
    name: &str,
    n: Option<usize>,
    k: u32,
    seed: u64,
    trials: u64,
    ensemble: &str,
    dim: usize,
    coeffs: &str,
    v: &str,
) -> CmdResult {
    match name {
        "bistochastic" => {
            let mut out = String::from("n,s,det\n");
            for st in bistochastic_chain(n.unwrap_or(10) as u64) {
                out.push_str(&format!("{},{},{}\n", st.n, format_rational(&st.s), format_rational(&st.det)));
            }
            Ok(out)
        }
        "div3x3" => {
            let mut out = String::from("k,n,p21,p31,ratio\n");
            for pt in divergence_3x3(k)? {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    pt.k,
                    pt.n,
                    format_rational(pt.p.get(1, 0)),
                    format_rational(pt.p.get(2, 0)),
                    format_rational(&pt.ratio)
                ));
            }
            Ok(out)
        }
        "tri2x2" => {
            let c: Vec<f64> = parse_list(coeffs, "coeffs")?;
            let vv: Vec<f64> = parse_list(v, "v")?;
            if c.len() != 3 || vv.len() != 2 {
                return Err(Failure::Input("tri2x2 needs --coeffs a,c,d and --v x,y".into()));
            }
            let n = n.unwrap_or(1000);
            let mut out = String::from("n,r,s,x,y,engine_x,engine_y\n");
            let mut checkpoints: Vec<usize> = (0..).map(|e| 10usize.pow(e)).take_while(|&m| m < n).collect();
            checkpoints.push(n);
            for m in checkpoints {
                let (a, cc, d) = (vec![c[0]; m], vec![c[1]; m], vec![c[2]; m]);
                let t = triangular_2x2(&a, &cc, &d, [vv[0], vv[1]])?;
                let e = triangular_2x2_engine(&a, &cc, &d, [vv[0], vv[1]])?;
                out.push_str(&format!("{m},{:e},{:e},{},{},{},{}\n", t.r, t.s, t.direction[0], t.direction[1], e[0], e[1]));
            }
            Ok(out)
        }
        "montecarlo" => {
            let n = n.unwrap_or(200);
            let recs = match ensemble {
                "rank-one" => {
                    let a = CMat::from_real(&FloatMat::from_ints(&[&[1, 2], &[2, 4]]));
                    vec![track_chain(seed, None, &vec![a; n])?]
                }
                e => monte_carlo(e.parse::<Ensemble>()?, dim, n, seed, trials)?,
            };
            Ok(trials_csv(&recs))
        }
        other => Err(Failure::Input(format!("unknown experiment {other:?}; expected bistochastic, div3x3, tri2x2, montecarlo"))),
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = match &cli.cmd {
        Cmd::Analyze { spec, segmentation, horizon, out } => (cmd_analyze(spec, segmentation, *horizon), out),
        Cmd::Triangularize { spec, horizon, out } => (cmd_triangularize(spec, *horizon), out),
        Cmd::Spectrum { generation, qmin, qmax, qstep, alpha_points, out } => {
            (cmd_spectrum(*generation, *qmin, *qmax, *qstep, *alpha_points), out)
        }
        Cmd::Experiments { name, n, k, seed, trials, ensemble, dim, coeffs, v, out } => {
            (cmd_experiments(name, *n, *k, *seed, *trials, ensemble, *dim, coeffs, v), out)
        }
    };
    let outcome = match result {
        Ok(text) => emit(&text, out).map(|_| ExitCode::SUCCESS),
        Err(Failure::Analytic(msg, partial)) => {
            if let Some(p) = partial {
                if let Err(f) = emit(&p, out) {
                    return report(f);
                }
            }
            eprintln!("matprod: {msg}");
            Ok(ExitCode::from(1))
        }
        Err(f) => Err(f),
    };
    outcome.unwrap_or_else(report)
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Input(msg) => {
            eprintln!("matprod: {msg}");
            ExitCode::from(2)
        }
        Failure::Analytic(msg, _) => {
            eprintln!("matprod: {msg}");
            ExitCode::from(1)
        }
    }
}
