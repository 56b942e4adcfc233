use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use spinlab::SpinlabError;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spinlab", version, about = "Finite-dimensional checks for Clifford modules, oscillators, Witten localization, torsors, FDA models and gerbes")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Overrides the numeric tolerance of the subcommand.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clifford relations of both quaternionic modules and the canonical intertwiner.
    QuatReps {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 25)]
        bases: usize,
    },
    /// Flat and cylindrical-end oscillator kernels.
    Oscillator {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,8")]
        t: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
    },
    /// Tameness and localization bounds along a geometric sweep of `t`.
    Witten(WittenArgs),
    /// Chern number, antipodal square and component invariant on a mesh.
    Torsor {
        /// OFF file; defaults to the 1280-face icosphere.
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        weight: i32,
    },
    /// Axioms and hK3 conditions of an FDA model.
    Fda {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        check: FdaCheck,
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// Cocycle check and trivialization of an O(1)-gerbe.
    Gerbe {
        #[arg(long)]
        nerve: PathBuf,
        #[arg(long)]
        cochain: PathBuf,
        #[arg(long)]
        trivialize: bool,
    },
    /// Every module on its built-in reference data.
    All,
}

#[derive(Args)]
struct WittenArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// `start:factor:count`.
    #[arg(long, default_value = "1:2:6")]
    t_sweep: String,
    /// Spectral cut; defaults to the model's λ̄.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FdaCheck {
    Axioms,
    Hk3,
    All,
}

enum Failure {
    Input(String),
    Run(String),
}

impl From<SpinlabError> for Failure {
    fn from(e: SpinlabError) -> Self {
        match e {
            SpinlabError::Input(_) | SpinlabError::DimensionMismatch { .. } => Failure::Input(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

type Outcome = Result<(bool, Value), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn quat_reps(n: usize, bases: usize, seed: u64, tol: f64) -> Outcome {
    use spinlab::op::Op;
    use spinlab::quaternionic::*;
    use spinlab::scalar::{Qi, Scalar};
    if n == 0 {
        return Err(Failure::Input("n must be positive".into()));
    }
    let v = QuaternionicSpace::new(n);
    let dim = 1usize << (4 * n);
    let id = Op::<Qi>::identity(dim);
    let mut exact = true;
    for m in [build_s0::<Qi>(&v)?, build_s1::<Qi>(&v)?] {
        for a in 0..4 * n {
            for b in 0..4 * n {
                let two = Qi::from_int(2 * i64::from(a == b));
                exact &= m.clifford[a].anticommutator(&m.clifford[b]) == id.scale(&-two.clone());
                exact &= m.hermitian[a].anticommutator(&m.hermitian[b]) == id.scale(&two);
                exact &= m.clifford[a].anticommutator(&m.hermitian[b]).is_zero();
            }
        }
    }
    let f = canonical_intertwiner(&v)?;
    let defect = verify_intertwiner(&v, &f)?.max_defect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = basis_independence(&v, bases, &mut rng)?;
    let pass = exact && defect < tol && basis < tol;
    Ok((pass, json!({ "n": n, "clifford_relations_exact": exact, "intertwiner_defect": defect, "basis_deviation": basis, "bases": bases })))
}

fn oscillator(ts: &[f64], nodes: usize, tol: f64) -> Outcome {
    use spinlab::oscillator::*;
    let mut flat = Vec::new();
    let mut pass = true;
    for &t in ts {
        if !(t > 0.0) {
            return Err(Failure::Input(format!("t = {t} must be positive")));
        }
        let p = OscillatorProblem { m: 1, t, metric: Metric::Flat, grid: Grid::new(nodes, 8.0)?, n_eigs: 10 };
        let r = grid_spectrum(&p)?;
        let overlap = r.kernel.first().map(|k| k.gaussian_overlap(t));
        let pairing = r.pairing_defect(1e-9);
        pass &= r.kernel_dim == 1 && overlap.is_some_and(|o| o >= 0.9999) && pairing < tol;
        flat.push(json!({ "t": t, "kernel_dim": r.kernel_dim, "gaussian_overlap": overlap, "pairing_defect": pairing, "gap": r.gap }));
    }
    let th = localization_threshold(Metric::CylindricalEnd { r0: 1.0 }, Grid::new(800, 6.0)?)?;
    let mut pseudo = Vec::new();
    for t in [th.t_min.ceil(), 2.0 * th.t_min] {
        let r = pseudo_susy_spectrum(&OscillatorProblem::pseudo(1, t, 800)?)?;
        let c = kernel_correspondence(&flat_susy_spectrum(1, t, 2)?, &r)?;
        pass &= r.kernel_dim == 1 && c.overlap >= 0.999;
        pseudo.push(json!({ "t": t, "kernel_dim": r.kernel_dim, "overlap": c.overlap, "tau_defect": c.tau_defect }));
    }
    Ok((pass, json!({ "flat": flat, "threshold": th.t_min, "pseudo": pseudo })))
}

fn parse_sweep(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Input(format!("--t-sweep {s:?} is not start:factor:count"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else { return Err(bad()) };
    let (start, factor, count): (f64, f64, u32) =
        (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?);
    if !(start > 0.0 && factor >= 1.0 && count > 0) {
        return Err(bad());
    }
    Ok((0..count).map(|k| start * factor.powi(k as i32)).collect())
}

fn witten(args: &WittenArgs) -> Outcome {
    use spinlab::witten::*;
    let spec: ModelSpec = match &args.model {
        Some(p) => read_json(p)?,
        None => reference_models()[0].base.clone(),
    };
    let sweep = parse_sweep(&args.t_sweep)?;
    let model = TameTupleModel::assemble(spec)?;
    let tame = check_tame(&model);
    let lambda = args.lambda.unwrap_or(model.spec.lambda_bar);
    let mut steps = Vec::new();
    let mut pass = tame.passed();
    let mut evaluated = 0;
    for t in sweep {
        if t < model.t_min {
            steps.push(json!({ "t": t, "skipped": "below T" }));
            continue;
        }
        let r = verify_localization(&model, t, lambda)?;
        pass &= r.passed;
        evaluated += 1;
        steps.push(serde_json::to_value(&r).expect("serializable"));
    }
    pass &= evaluated > 0;
    Ok((pass, json!({ "model": model.spec.name, "t_min": model.t_min, "lambda": lambda, "tame": tame, "sweep": steps })))
}

fn torsor(mesh: Option<&Path>, weight: i32, tol: f64) -> Outcome {
    use spinlab::torsor::*;
    let mesh = match mesh {
        Some(p) => TriangulatedSphere::from_off(&read(p)?).map_err(|e| Failure::Input(e.to_string()))?,
        None => TriangulatedSphere::icosphere(3)?,
    };
    let triple = StandardTriple { weight };
    let chern = chern_number(&triple, &mesh)?;
    let sq = antipodal_lift_square(&triple)?;
    let one = Complex64::new(1.0, 0.0);
    let plus = component_invariant(&mesh, &EquivariantFunction::from_fn(&mesh, |_| one)?)?;
    let minus = component_invariant(&mesh, &EquivariantFunction::from_fn(&mesh, |_| -one)?)?;
    let expect_sq = if weight.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let pass = chern.value == i64::from(weight)
        && chern.residue < tol
        && sq.iter().all(|z| *z == Complex64::new(expect_sq, 0.0))
        && plus.sign == 1
        && minus.sign == -1;
    Ok((
        pass,
        json!({
            "faces": mesh.faces.len(),
            "weight": weight,
            "chern": chern,
            "iota_sq": sq.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "components": { "plus_one": plus.sign, "minus_one": minus.sign },
        }),
    ))
}

fn fda(model: &Path, check: FdaCheck, samples: usize, seed: u64) -> Outcome {
    use spinlab::fda::*;
    let m: FdaModel = read_json(model)?;
    m.validate()?;
    let mut pass = true;
    let mut out = json!({ "model": m.name });
    if matches!(check, FdaCheck::Axioms | FdaCheck::All) {
        let rep = check_axioms(&m, samples, seed);
        pass &= rep.passed();
        out["axioms"] = serde_json::to_value(&rep).expect("serializable");
    }
    if matches!(check, FdaCheck::Hk3 | FdaCheck::All) {
        match hk3_conditions(&m) {
            Ok(rep) => {
                pass &= rep.passed();
                out["hk3"] = serde_json::to_value(&rep).expect("serializable");
            }
            Err(e) => {
                pass = false;
                out["hk3"] = json!({ "error": e.to_string() });
            }
        }
    }
    Ok((pass, out))
}

fn gerbe(nerve: &Path, cochain: &Path, solve: bool) -> Outcome {
    use spinlab::gerbe::*;
    let n: FiniteNerve = read_json(nerve)?;
    let file: CochainFile = read_json(cochain)?;
    let g = O1Gerbe::new(n.clone(), Cochain::from_file(&n, &file)?)?;
    let report = verify_cocycle(&g);
    let mut pass = report.passed;
    let mut out = json!({ "cocycle": report });
    if solve && pass {
        out["trivialization"] = match trivialize(&g)? {
            Trivialization::Trivial { u } => json!({ "kind": "trivial", "u": u.to_file(&n) }),
            Trivialization::Obstructed(o) => {
                pass &= o.verify(&g);
                json!({ "kind": "obstructed", "cycle": o.cycle })
            }
        };
    }
    Ok((pass, out))
}

fn all(seed: u64, tol: Option<f64>) -> Outcome {
    use spinlab::fda::*;
    use spinlab::gerbe::*;
    let mut pass = true;
    let mut out = serde_json::Map::new();
    let mut record = |name: &str, r: Outcome| -> Result<(), Failure> {
        let (ok, v) = r?;
        pass &= ok;
        out.insert(name.into(), json!({ "passed": ok, "report": v }));
        Ok(())
    };
    record("quat-reps", quat_reps(1, 25, seed, tol.unwrap_or(1e-12)))?;
    record("oscillator", oscillator(&[0.5, 1.0, 2.0, 8.0], 1000, tol.unwrap_or(1e-8)))?;
    record("witten", witten(&WittenArgs { model: None, t_sweep: "1:2:6".into(), lambda: None }))?;
    record("torsor", torsor(None, 1, tol.unwrap_or(1e-6)))?;
    let toy = sw_toy(2, 1, 1);
    let axioms = check_axioms(&toy, 500, seed);
    let hk3 = hk3_conditions(&toy)?;
    record("fda", Ok((axioms.passed() && hk3.passed(), json!({ "axioms": axioms, "hk3": hk3 }))))?;
    let g = rp2_lift_gerbe();
    let ok = matches!(spinlab::gerbe::trivialize(&g)?, Trivialization::Obstructed(ref o) if o.verify(&g));
    record("gerbe", Ok((ok, json!({ "rp2_obstructed": ok }))))?;
    Ok((pass, Value::Object(out)))
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::QuatReps { n, bases } => quat_reps(*n, *bases, cli.seed, cli.tol.unwrap_or(1e-12)),
        Command::Oscillator { t, nodes } => oscillator(t, *nodes, cli.tol.unwrap_or(1e-8)),
        Command::Witten(args) => witten(args),
        Command::Torsor { mesh, weight } => torsor(mesh.as_deref(), *weight, cli.tol.unwrap_or(1e-6)),
        Command::Fda { model, check, samples } => fda(model, *check, *samples, cli.seed),
        Command::Gerbe { nerve, cochain, trivialize } => gerbe(nerve, cochain, *trivialize),
        Command::All => all(cli.seed, cli.tol),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("SPINLAB_THREADS") else { return Ok(()) };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("SPINLAB_THREADS={v:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("spinlab: {e}");
        return ExitCode::from(2);
    }
    let (code, report) = match run(&cli) {
        Ok((pass, v)) => (u8::from(!pass), json!({ "passed": pass, "report": v })),
        Err(Failure::Input(msg)) => {
            eprintln!("spinlab: {msg}");
            return ExitCode::from(2);
        }
        Err(Failure::Run(msg)) => (1, json!({ "passed": false, "error": msg })),
    };
    let text = serde_json::to_string_pretty(&report).expect("serializable");
    if let Some(path) = &cli.json {
        if let Err(e) = std::fs::write(path, format!("{text}\n")) {
            eprintln!("spinlab: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if !cli.quiet {
        // a closed pipe only loses the copy on stdout
        let _ = writeln!(std::io::stdout(), "{text}");
    }
    ExitCode::from(code)
}
