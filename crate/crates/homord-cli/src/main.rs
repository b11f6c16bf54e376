use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use homord::automorphism::{Lab, Tag};
use homord::certificate::{replay, ConstructionRun};
use homord::constructions::{
    build_case1, build_commutator_single, build_maximal_mover, build_n_order_single_orbital, build_two_orbitals,
    enumerate_types, make_single_plus_orbital, realize_independent_multiorder, verify_moves_maximally, Hand,
};
use homord::fraisse::{ClassSpec, Universe};
use homord::independence::{check_axiom, Axiom, IndependenceRelation, MAX_BOUND};
use homord::structure::FiniteStructure;
use homord::Error;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "homord", version, about = "Independence relations and automorphisms of ordered homogeneous structures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Materialize a seeded fragment of a limit and print its snapshot.
    Build {
        #[command(flatten)]
        universe: UniverseArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the five independence axioms exhaustively on a fragment.
    CheckSwir {
        #[command(flatten)]
        universe: UniverseArgs,
        #[arg(long, default_value_t = 4)]
        bound: usize,
        /// natural, free, lifted, multi-order or order-K
        #[arg(long, default_value = "natural")]
        relation: String,
        #[arg(long)]
        drop_order_clause: bool,
        #[arg(long)]
        axiom: Option<String>,
    },
    /// Run a certified construction.
    Construct {
        #[command(flatten)]
        universe: UniverseArgs,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// One tag for every order, or a comma separated list.
        #[arg(long)]
        profile: Option<String>,
        /// Number of enumerated types for max-mover and multi-realize.
        #[arg(long, default_value_t = 5)]
        types: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Snapshot path; defaults to the run path with a .snapshot.json suffix.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Test whether a synthesized map moves the first enumerated types maximally.
    VerifyMaxMove {
        #[command(flatten)]
        universe: UniverseArgs,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value_t = 5)]
        types: usize,
        /// R or L
        #[arg(long, default_value = "R")]
        hand: String,
        #[arg(long, default_value = "natural")]
        relation: String,
    },
    /// Re-validate every certificate of a run against a snapshot.
    Replay { run: PathBuf, snapshot: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Class {
    RandomGraph,
    K3free,
    Orders,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Case1,
    TwoOrbitals,
    Commutator,
    Dispatch,
    MaxMover,
    NOrder,
    MultiRealize,
}

#[derive(Args)]
struct UniverseArgs {
    #[arg(long, value_enum, default_value_t = Class::RandomGraph)]
    class: Class,
    /// Number of linear orders; defaults to 1.
    #[arg(long)]
    orders: Option<usize>,
    /// Seeded random extension steps before the command runs.
    #[arg(long, default_value_t = 8)]
    steps: usize,
    /// Overridden by HOMORD_SEED.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Fail {
    Usage(String),
    Lib(Error),
    Io(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Usage(_) => 2,
            Fail::Io(_) => 1,
            Fail::Lib(e) => match e {
                Error::Parse(_) | Error::InvalidSignature(_) | Error::InstanceTooLarge(_) => 2,
                Error::ProfileMismatch(_)
                | Error::TrivialInput
                | Error::HypothesisUnmet(_)
                | Error::EmptyBase
                | Error::EmptyBaseUnorderable
                | Error::RelationNotApplicable(_)
                | Error::LemmaInapplicable(_) => 3,
                _ => 1,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Fail::Usage(m) | Fail::Io(m) => m.clone(),
            Fail::Lib(e) => e.to_string(),
        }
    }
}

type Out = std::result::Result<bool, Fail>;

impl UniverseArgs {
    fn seed(&self) -> std::result::Result<u64, Fail> {
        match std::env::var("HOMORD_SEED") {
            Ok(s) => s.trim().parse().map_err(|_| Fail::Usage(format!("HOMORD_SEED={s:?} is not an unsigned integer"))),
            Err(_) => Ok(self.seed),
        }
    }

    fn spec(&self) -> std::result::Result<ClassSpec, Fail> {
        let n = self.orders.unwrap_or(1);
        match self.class {
            Class::RandomGraph => Ok(ClassSpec::random_graph(n)),
            Class::K3free => Ok(ClassSpec::k3_free(n)),
            Class::Orders if n == 0 => Err(Fail::Usage("--class orders needs at least one order".into())),
            Class::Orders => Ok(ClassSpec::pure_orders(n)),
        }
    }

    fn universe(&self) -> std::result::Result<Universe, Fail> {
        let mut u = Universe::new(self.spec()?, self.seed()?);
        u.grow_random(self.steps);
        Ok(u)
    }
}

fn parse_relation(s: &str, spec: &ClassSpec) -> std::result::Result<IndependenceRelation, Fail> {
    let rel = match s {
        "natural" => IndependenceRelation::natural(spec)?,
        "free" => IndependenceRelation::free(),
        "lifted" => IndependenceRelation::lifted(),
        "multi-order" => IndependenceRelation::multi_order(),
        _ => match s.strip_prefix("order-").and_then(|k| k.parse::<usize>().ok()) {
            Some(k) if k >= 1 => IndependenceRelation::per_order(k - 1),
            _ => return Err(Fail::Usage(format!("unknown relation {s:?}"))),
        },
    };
    Ok(rel)
}

fn parse_profile(s: Option<&str>, default: Tag, n: usize) -> std::result::Result<Vec<Tag>, Fail> {
    let Some(s) = s else { return Ok(vec![default; n]) };
    let tags = s.split(',').map(|t| t.trim().parse::<Tag>()).collect::<homord::Result<Vec<_>>>()?;
    match tags.len() {
        1 => Ok(vec![tags[0]; n]),
        k if k == n => Ok(tags),
        k => Err(Fail::Usage(format!("{k} profile tags for {n} orders"))),
    }
}

fn write(path: &Path, text: &str) -> std::result::Result<(), Fail> {
    fs::write(path, text).map_err(|e| Fail::Io(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> std::result::Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail::Usage(format!("{}: {e}", path.display())))
}

fn emit(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn print(v: &Value) {
    emit(&serde_json::to_string_pretty(v).expect("json serializes"));
}

fn cmd_build(universe: &UniverseArgs, out: Option<&Path>) -> Out {
    let snap = universe.universe()?.snapshot().to_string();
    match out {
        Some(p) => write(p, &(snap + "\n"))?,
        None => emit(&snap),
    }
    Ok(true)
}

fn cmd_check_swir(universe: &UniverseArgs, bound: usize, relation: &str, drop: bool, axiom: Option<&str>) -> Out {
    if bound > MAX_BOUND {
        return Err(Fail::Usage(format!("bound {bound} exceeds {MAX_BOUND}")));
    }
    let u = universe.universe()?;
    let mut rel = parse_relation(relation, u.spec())?;
    if drop {
        rel = rel.without_order_clause();
    }
    let axioms = match axiom {
        Some(a) => vec![a.parse::<Axiom>()?],
        None => Axiom::ALL.to_vec(),
    };
    let mut verdicts = Vec::new();
    let mut ok = true;
    for a in axioms {
        let r = check_axiom(&u, &rel, a, bound)?;
        ok &= r.passed();
        verdicts.push(r.to_json());
    }
    print(&json!({
        "seed": u.seed(),
        "relation": rel.to_string(),
        "elements": u.len(),
        "verdicts": verdicts,
        "result": if ok { "pass" } else { "fail" },
    }));
    Ok(ok)
}

fn default_tag(kind: Kind) -> Tag {
    match kind {
        Kind::Case1 | Kind::Dispatch | Kind::NOrder => Tag::StrictlyUp,
        Kind::TwoOrbitals | Kind::Commutator => Tag::UpAboveDownBelow,
        Kind::MaxMover | Kind::MultiRealize => Tag::StrictlyDown,
    }
}

fn merge(kind: &str, seed: u64, runs: Vec<ConstructionRun>) -> ConstructionRun {
    let mut out = ConstructionRun::new(kind, seed, runs.len());
    let mut summaries = Vec::new();
    for (i, r) in runs.into_iter().enumerate() {
        for mut s in r.stages {
            s.phase = format!("type {} {}", i + 1, s.phase);
            out.stages.push(s);
        }
        summaries.push(r.summary);
    }
    out.summary = json!({ "types": summaries });
    out
}

fn run_construction(lab: &mut Lab, kind: Kind, tags: &[Tag], depth: usize, types: usize) -> homord::Result<ConstructionRun> {
    let g = lab.synthesize("g", tags)?;
    Ok(match kind {
        Kind::Case1 => build_case1(lab, g, depth)?.run,
        Kind::TwoOrbitals => build_two_orbitals(lab, g, depth)?.run,
        Kind::Commutator => build_commutator_single(lab, g, depth)?.run,
        Kind::Dispatch => make_single_plus_orbital(lab, g, depth)?.run,
        Kind::NOrder => build_n_order_single_orbital(lab, g, depth)?.run,
        Kind::MaxMover => {
            let ps = enumerate_types(lab.universe(), types);
            build_maximal_mover(lab, g, &ps)?.run
        }
        Kind::MultiRealize => {
            let rel = IndependenceRelation::multi_order();
            let ps = enumerate_types(lab.universe(), types);
            let mut runs = Vec::new();
            for p in &ps {
                runs.push(realize_independent_multiorder(lab, p, g, &rel)?.run);
            }
            merge("multi-realize", lab.universe().seed(), runs)
        }
    })
}

fn summary_line(run: &ConstructionRun) -> Value {
    let s = &run.summary;
    let chain = s.get("chain").or_else(|| s.pointer("/final/chain")).and_then(Value::as_array).map(Vec::len);
    let covered = s
        .get("initial_covered")
        .or_else(|| s.get("covered"))
        .and_then(Value::as_array)
        .map(Vec::len);
    let word = s.get("f").or_else(|| s.get("word")).or_else(|| s.get("right")).cloned();
    json!({
        "kind": run.kind,
        "seed": run.seed,
        "depth": run.depth,
        "verdict": run.verdict().to_json(),
        "stages": run.stages.len(),
        "checks": run.num_checks(),
        "chain_length": chain,
        "coverage": covered,
        "word": word,
        "summary": s,
    })
}

fn snapshot_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.snapshot.json"))
}

fn cmd_construct(
    universe: &UniverseArgs,
    kind: Kind,
    depth: usize,
    profile: Option<&str>,
    types: usize,
    out: Option<&Path>,
    snapshot: Option<&Path>,
) -> Out {
    let u = universe.universe()?;
    let tags = parse_profile(profile, default_tag(kind), u.num_orders())?;
    let mut lab = Lab::new(u);
    let run = run_construction(&mut lab, kind, &tags, depth, types)?;
    if let Some(p) = out {
        write(p, &run.to_jsonl())?;
    }
    let snap = snapshot.map(Path::to_path_buf).or_else(|| out.map(snapshot_path));
    if let Some(p) = snap {
        write(&p, &(lab.universe().snapshot().to_string() + "\n"))?;
    }
    print(&summary_line(&run));
    Ok(run.verdict().is_verified())
}

fn cmd_verify_max_move(universe: &UniverseArgs, profile: Option<&str>, types: usize, hand: &str, relation: &str) -> Out {
    let u = universe.universe()?;
    let tags = parse_profile(profile, Tag::StrictlyDown, u.num_orders())?;
    let rel = parse_relation(relation, u.spec())?;
    let hand: Hand = hand.parse()?;
    let mut lab = Lab::new(u);
    let g = lab.synthesize("g", &tags)?;
    let ps = enumerate_types(lab.universe(), types);
    let verdicts = verify_moves_maximally(&mut lab, g, &ps, hand, &rel)?;
    let ok = verdicts.iter().all(|v| v.moves_maximally);
    print(&json!({
        "seed": lab.universe().seed(),
        "relation": rel.to_string(),
        "verdicts": verdicts.iter().map(|v| v.to_json()).collect::<Vec<_>>(),
        "result": if ok { "pass" } else { "fail" },
    }));
    Ok(ok)
}

fn cmd_replay(run: &Path, snapshot: &Path) -> Out {
    let run = ConstructionRun::from_jsonl(&read(run)?)?;
    let v: Value = serde_json::from_str(&read(snapshot)?).map_err(|e| Fail::Usage(format!("snapshot: {e}")))?;
    let s = FiniteStructure::from_json(&v)?;
    let report = replay(&run, &s);
    let ok = report.ok();
    print(&json!({ "kind": run.kind, "seed": run.seed, "replay": report.to_json() }));
    Ok(ok)
}

fn dispatch(cli: &Cli) -> Out {
    match &cli.cmd {
        Cmd::Build { universe, out } => cmd_build(universe, out.as_deref()),
        Cmd::CheckSwir { universe, bound, relation, drop_order_clause, axiom } => {
            cmd_check_swir(universe, *bound, relation, *drop_order_clause, axiom.as_deref())
        }
        Cmd::Construct { universe, kind, depth, profile, types, out, snapshot } => {
            cmd_construct(universe, *kind, *depth, profile.as_deref(), *types, out.as_deref(), snapshot.as_deref())
        }
        Cmd::VerifyMaxMove { universe, profile, types, hand, relation } => {
            cmd_verify_max_move(universe, profile.as_deref(), *types, hand, relation)
        }
        Cmd::Replay { run, snapshot } => cmd_replay(run, snapshot),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("homord: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
