//! Command-line front end.
//!
//! [`run`] parses arguments, performs one computation and returns the exit
//! code together with everything written to standard output. Exit code 0 is
//! success, 2 an input or operational error, 3 a verification that came out
//! false.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::complexes::{shear, ComplexError};
use crate::derham::{
    central_character, character_equivalent, curvature, de_rham_complex, flat_descend, build_omega_d,
    ConnectionModule, DerhamError, FlatDescent, Forms,
};
use crate::hochschild::{self, bar_complex, hkr_is_quasi_iso, verify_b_is_de_rham, Backend, HochschildError};
use crate::linalg::format_rational;
use crate::presentations::{parse_document, parse_expr_in, Document, GCAlgebra, PresentationError};
use crate::rees::{
    ext_over_exterior, koszul_dual_dmodule, localize_t, parse_rees, parse_weyl, random_rees, subprincipal, symbol,
    ReesError,
};
use crate::{limits, par};

pub const SCHEMA_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Bar,
    Koszul,
}

#[derive(Debug, Parser)]
#[command(name = "loopforms", version, about = "Hochschild, cyclic and de Rham computations over Q")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Largest poly-weight computed.
    #[arg(long, global = true, default_value_t = 4)]
    pub max_weight: u32,
    #[arg(long, global = true, default_value_t = -4, allow_hyphen_values = true)]
    pub min_degree: i32,
    #[arg(long, global = true, default_value_t = 0, allow_hyphen_values = true)]
    pub max_degree: i32,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long, global = true, value_enum, default_value_t = Switch::On)]
    pub parallel: Switch,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Bar length for b-check, shear amount for shear, truncation degree for ext-exterior.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub n: Option<i64>,
    /// Algebra to use when the file declares several.
    #[arg(long, global = true)]
    pub algebra: Option<String>,
    /// Module to use when the file declares several.
    #[arg(long, global = true)]
    pub module: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hochschild homology dimensions.
    Hh {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = BackendArg::Bar)]
        backend: BackendArg,
    },
    /// Cyclic homology dimensions.
    Hc { input: PathBuf },
    /// Negative cyclic homology dimensions.
    Hcneg { input: PathBuf },
    /// Periodic cyclic homology dimensions.
    Hp { input: PathBuf },
    /// De Rham cohomology dimensions per form degree and poly-weight.
    Derham { input: PathBuf },
    /// Bar homology against the forms model, and the HKR map in each degree.
    HkrCheck { input: PathBuf },
    /// The scalar relating the Connes operator to the de Rham differential.
    BCheck { input: PathBuf },
    /// Relations of the forms algebra with the differential adjoined.
    OmegaD { input: PathBuf },
    /// Curvature of a connection and its central character.
    Curvature { input: PathBuf },
    /// Flatness of a connection.
    Flat { input: PathBuf },
    /// Whether two central characters differ by an exact form.
    Character {
        input: PathBuf,
        #[arg(long)]
        omega1: Option<String>,
        #[arg(long)]
        omega2: String,
    },
    /// Randomized checks of the Weyl and Rees algebras.
    ReesCheck,
    /// Ext over the exterior algebra on one odd generator.
    ExtExterior,
    /// The D-module of a flat connection.
    KoszulDmod { input: PathBuf },
    /// Homology of the sheared bar complex.
    Shear { input: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Hh { .. } => "hh",
            Command::Hc { .. } => "hc",
            Command::Hcneg { .. } => "hcneg",
            Command::Hp { .. } => "hp",
            Command::Derham { .. } => "derham",
            Command::HkrCheck { .. } => "hkr-check",
            Command::BCheck { .. } => "b-check",
            Command::OmegaD { .. } => "omega-d",
            Command::Curvature { .. } => "curvature",
            Command::Flat { .. } => "flat",
            Command::Character { .. } => "character",
            Command::ReesCheck => "rees-check",
            Command::ExtExterior => "ext-exterior",
            Command::KoszulDmod { .. } => "koszul-dmod",
            Command::Shear { .. } => "shear",
        }
    }

    fn input(&self) -> Option<&PathBuf> {
        match self {
            Command::Hh { input, .. }
            | Command::Hc { input }
            | Command::Hcneg { input }
            | Command::Hp { input }
            | Command::Derham { input }
            | Command::HkrCheck { input }
            | Command::BCheck { input }
            | Command::OmegaD { input }
            | Command::Curvature { input }
            | Command::Flat { input }
            | Command::Character { input, .. }
            | Command::KoszulDmod { input }
            | Command::Shear { input } => Some(input),
            Command::ReesCheck | Command::ExtExterior => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub degree: i32,
    pub dim: usize,
    pub weight: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub ok: bool,
    pub witness: String,
}

/// The output of one invocation; keys serialize in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub request: BTreeMap<String, Value>,
    pub tables: Vec<TableRow>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub version: String,
}

impl ResultDocument {
    fn new(request: BTreeMap<String, Value>) -> Self {
        ResultDocument { request, tables: Vec::new(), verdicts: BTreeMap::new(), version: SCHEMA_VERSION.to_string() }
    }

    fn table(&mut self, t: &BTreeMap<(i32, i32), usize>) {
        // rows ordered by weight, then degree from the top down
        let mut rows: Vec<TableRow> = t.iter().map(|(&(degree, weight), &dim)| TableRow { degree, dim, weight }).collect();
        rows.sort_by_key(|r| (r.weight, -r.degree));
        self.tables = rows;
    }

    fn verdict(&mut self, name: &str, ok: bool, witness: impl Into<String>) {
        self.verdicts.insert(name.to_string(), Verdict { ok, witness: witness.into() });
    }

    pub fn all_ok(&self) -> bool {
        self.verdicts.values().all(|v| v.ok)
    }
}

/// Serializes a document; identical documents give identical bytes.
pub fn emit(doc: &ResultDocument, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = String::new();
            let cmd = doc.request.get("command").and_then(Value::as_str).unwrap_or("");
            let input = doc.request.get("input").and_then(Value::as_str).unwrap_or("-");
            let _ = writeln!(s, "loopforms {cmd} {input}");
            if !doc.tables.is_empty() {
                let _ = writeln!(s, "{:>8} {:>8} {:>8}", "weight", "degree", "dim");
                for r in &doc.tables {
                    let _ = writeln!(s, "{:>8} {:>8} {:>8}", r.weight, r.degree, r.dim);
                }
            }
            for (name, v) in &doc.verdicts {
                let status = if v.ok { "ok" } else { "FAILED" };
                if v.witness.is_empty() {
                    let _ = writeln!(s, "{name}: {status}");
                } else {
                    let _ = writeln!(s, "{name}: {status} ({})", v.witness);
                }
            }
            s
        }
    }
}

/// An error together with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, kind: "input", message: message.into() }
    }

    fn verification(message: impl Into<String>) -> Self {
        Failure { code: 3, kind: "verification", message: message.into() }
    }
}

impl From<PresentationError> for Failure {
    fn from(e: PresentationError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<ComplexError> for Failure {
    fn from(e: ComplexError) -> Self {
        match e {
            ComplexError::MixedIdentityFailure { .. } | ComplexError::NotSquareZero { .. } | ComplexError::NotChainMap { .. } => {
                Failure::verification(e.to_string())
            }
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<HochschildError> for Failure {
    fn from(e: HochschildError) -> Self {
        match e {
            HochschildError::Complex(c) => c.into(),
            HochschildError::NoScalarWorks { .. } => Failure::verification(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<DerhamError> for Failure {
    fn from(e: DerhamError) -> Self {
        match e {
            DerhamError::Complex(c) => c.into(),
            DerhamError::NotCentral | DerhamError::NotClosed(_) => Failure::verification(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<ReesError> for Failure {
    fn from(e: ReesError) -> Self {
        match e {
            ReesError::Derham(d) => d.into(),
            ReesError::NotFlat { .. } => Failure::verification(e.to_string()),
            ReesError::Parse { .. } => Failure::input(e.to_string()),
        }
    }
}

fn request(cli: &Cli) -> BTreeMap<String, Value> {
    let mut r = BTreeMap::new();
    r.insert("command".into(), json!(cli.command.name()));
    r.insert("input".into(), json!(cli.command.input().map(|p| p.display().to_string())));
    r.insert("max_weight".into(), json!(cli.max_weight));
    r.insert("min_degree".into(), json!(cli.min_degree));
    r.insert("max_degree".into(), json!(cli.max_degree));
    r.insert("parallel".into(), json!(cli.parallel == Switch::On));
    r.insert("seed".into(), json!(cli.seed));
    if let Some(n) = cli.n {
        r.insert("n".into(), json!(n));
    }
    if let Command::Hh { backend, .. } = &cli.command {
        r.insert("backend".into(), json!(if *backend == BackendArg::Bar { "bar" } else { "koszul" }));
    }
    if let Command::Character { omega1, omega2, .. } = &cli.command {
        r.insert("omega1".into(), json!(omega1));
        r.insert("omega2".into(), json!(omega2));
    }
    r
}

fn load(path: &PathBuf) -> Result<Document, Failure> {
    let src = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_document(&src)?)
}

fn pick_algebra<'a>(doc: &'a Document, name: Option<&str>) -> Result<&'a GCAlgebra, Failure> {
    match name {
        Some(n) => doc.algebra(n).ok_or_else(|| Failure::input(format!("no algebra named `{n}`"))),
        None => doc.algebras.first().ok_or_else(|| Failure::input("the file declares no algebra")),
    }
}

fn pick_module(doc: &Document, name: Option<&str>) -> Result<ConnectionModule, Failure> {
    let decl = match name {
        Some(n) => doc.modules.iter().find(|m| m.name == n).ok_or_else(|| Failure::input(format!("no module named `{n}`")))?,
        None => doc.modules.first().ok_or_else(|| Failure::input("the file declares no module"))?,
    };
    Ok(ConnectionModule::from_decl(decl, doc)?)
}

fn matrix_string(m: &ConnectionModule, r: &[Vec<crate::presentations::Element>]) -> String {
    let rows: Vec<String> = r
        .iter()
        .map(|row| format!("[{}]", row.iter().map(|e| m.forms().format(e)).collect::<Vec<_>>().join(", ")))
        .collect();
    if rows.len() == 1 && r[0].len() == 1 {
        m.forms().format(&r[0][0])
    } else {
        format!("[{}]", rows.join(", "))
    }
}

fn execute(cli: &Cli, doc: &mut ResultDocument) -> Result<(), Failure> {
    let window = (cli.min_degree, cli.max_degree);
    let w = cli.max_weight;
    let file = cli.command.input().map(load).transpose()?;
    let algebra = || pick_algebra(file.as_ref().expect("command has an input"), cli.algebra.as_deref());
    let module = || pick_module(file.as_ref().expect("command has an input"), cli.module.as_deref());
    match &cli.command {
        Command::Hh { backend, .. } => {
            let b = if *backend == BackendArg::Bar { Backend::Bar } else { Backend::Koszul };
            doc.table(&hochschild::hh(algebra()?, window, w, b)?);
        }
        Command::Hc { .. } => doc.table(&hochschild::hc(algebra()?, window, w)?),
        Command::Hcneg { .. } => doc.table(&hochschild::hc_negative(algebra()?, window, w)?),
        Command::Hp { .. } => doc.table(&hochschild::hp(algebra()?, window, w)?),
        Command::Derham { .. } => {
            let forms = Forms::new(algebra()?, cli.seed)?;
            let c = de_rham_complex(&forms, w)?;
            doc.table(&c.complex.homology_table()?);
            doc.verdict("d_squared_zero", true, "");
            if c.filtered {
                doc.verdict("filtered", true, "weights are truncation levels");
            }
        }
        Command::HkrCheck { .. } => {
            let a = algebra()?;
            let bar = hochschild::hh(a, window, w, Backend::Bar)?;
            let koszul = hochschild::hh(a, window, w, Backend::Koszul)?;
            let mismatch = bar.keys().chain(koszul.keys()).find(|s| bar.get(s).unwrap_or(&0) != koszul.get(s).unwrap_or(&0));
            doc.table(&bar);
            doc.verdict("agreement", mismatch.is_none(), mismatch.map(|s| format!("slot ({}, {})", s.0, s.1)).unwrap_or_default());
            let bc = bar_complex(a, w, window.0)?;
            let depth = (-window.0).max(0) as usize;
            let failed = (0..=depth).map(|n| hkr_is_quasi_iso(a, &bc, n).map(|ok| (n, ok))).collect::<Result<Vec<_>, _>>()?;
            let bad: Vec<String> = failed.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.to_string()).collect();
            doc.verdict("quasi_isomorphism", bad.is_empty(), if bad.is_empty() { format!("degrees 0..-{depth}") } else { format!("fails in lengths {}", bad.join(", ")) });
        }
        Command::BCheck { .. } => {
            let n = cli.n.unwrap_or(1);
            if n < 0 {
                return Err(Failure::input("--n must be nonnegative"));
            }
            let check = verify_b_is_de_rham(algebra()?, n as usize, w)?;
            doc.verdict("scalar", check.verified, format_rational(&check.scalar));
            doc.verdict("verified", check.verified, format!("n = {n}, weights 0..{w}"));
        }
        Command::OmegaD { .. } => {
            let od = build_omega_d(algebra()?)?;
            let r = od.verify(w);
            let basis = format!("{} basis forms", r.checked_basis);
            doc.verdict("delta_squared_zero", r.delta_squared_zero, "");
            doc.verdict("commutator_is_d", r.commutator_is_d, basis);
            doc.verdict("associative", r.associative, "");
        }
        Command::Curvature { .. } => {
            let m = module()?;
            let r = curvature(&m);
            doc.verdict("delta_squared_is_curvature", m.delta_squared_is_curvature(w), matrix_string(&m, &r));
            match central_character(&m) {
                Ok(c) => {
                    let omega = m.forms().format(&c.omega);
                    doc.verdict("central", true, omega.clone());
                    doc.verdict("closed", c.closed, omega);
                }
                Err(DerhamError::NotCentral) => doc.verdict("central", false, matrix_string(&m, &r)),
                Err(e) => return Err(e.into()),
            }
            if !doc.verdicts["delta_squared_is_curvature"].ok {
                return Err(Failure::verification("δ² differs from the curvature action"));
            }
        }
        Command::Flat { .. } => {
            let m = module()?;
            match flat_descend(&m) {
                FlatDescent::Flat(_) => doc.verdict("flat", true, "0"),
                FlatDescent::FlatnessFailure(r) => doc.verdict("flat", false, matrix_string(&m, &r)),
            }
        }
        Command::Character { omega1, omega2, .. } => {
            let m = module()?;
            let forms = m.forms();
            let w1 = match omega1 {
                Some(s) => parse_expr_in(forms.algebra(), s)?,
                None => central_character(&m)?.omega,
            };
            let w2 = parse_expr_in(forms.algebra(), omega2)?;
            if !forms.d(&w2).is_zero() {
                return Err(DerhamError::NotClosed(forms.format(&w2)).into());
            }
            let e = character_equivalent(forms, &w1, &w2, w)?;
            let witness = e.alpha.as_ref().map(|a| forms.format(a)).unwrap_or_else(|| format!("{} is not exact within weight {w}", forms.format(&w2.sub(&w1))));
            doc.verdict("equivalent", e.equivalent, witness);
        }
        Command::ReesCheck => rees_check(cli.seed, doc)?,
        Command::ExtExterior => {
            let t = cli.n.unwrap_or(8);
            if t < 0 {
                return Err(Failure::input("--n must be nonnegative"));
            }
            let e = ext_over_exterior(t as u32);
            let table = e.dims.iter().map(|(&d, &n)| ((d, d.div_euclid(2)), n)).collect();
            doc.table(&table);
            doc.tables.sort_by_key(|r| r.degree);
            doc.verdict("resolution_exact", e.resolution_exact, "");
            doc.verdict("u_injective", e.u_injective, "");
        }
        Command::KoszulDmod { .. } => {
            let m = module()?;
            let dm = koszul_dual_dmodule(&m, w)?;
            doc.verdict("weyl_relations", dm.weyl_relations_hold(), format!("sections of weight <= {w}"));
            let back = dm.to_connection()?;
            doc.verdict("round_trip", back.gamma() == m.gamma(), "");
        }
        Command::Shear { .. } => {
            let n = cli.n.unwrap_or(2) as i32;
            let bc = bar_complex(algebra()?, w, window.0)?;
            let original = bc.complex().homology_table()?;
            let sheared = shear(bc.complex(), n).homology_table()?;
            let moved: BTreeMap<(i32, i32), usize> =
                original.iter().map(|(&(d, wt), &k)| ((d - n * wt, wt), k)).collect();
            doc.table(&sheared);
            doc.verdict("invariant", moved == sheared, format!("n = {n}"));
        }
    }
    if doc.all_ok() {
        Ok(())
    } else {
        let failed: Vec<&str> = doc.verdicts.iter().filter(|(_, v)| !v.ok).map(|(k, _)| k.as_str()).collect();
        Err(Failure::verification(format!("failed: {}", failed.join(", "))))
    }
}

fn rees_check(seed: u64, doc: &mut ResultDocument) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = 50;
    let (mut sym, mut loc, mut assoc, mut sub) = (true, true, true, true);
    for k in 0..pairs {
        let n = 1 + k % 2;
        let a = random_rees(&mut rng, n, 3);
        let b = random_rees(&mut rng, n, 3);
        let c = random_rees(&mut rng, n, 3);
        sym &= symbol(&a.mul(&b)) == symbol(&a).mul(&symbol(&b));
        loc &= localize_t(&a.mul(&b)) == localize_t(&a).mul(&localize_t(&b));
        assoc &= a.mul(&b).mul(&c) == a.mul(&b.mul(&c));
        sub &= subprincipal(&a).mul(&subprincipal(&b)) == subprincipal(&a.mul(&b));
    }
    let e = parse_rees(1, "T*x")?;
    let pairs_note = format!("{pairs} seeded pairs");
    doc.verdict("symbol_multiplicative", sym, pairs_note.clone());
    doc.verdict("localization_multiplicative", loc, pairs_note.clone());
    doc.verdict("associative", assoc, pairs_note.clone());
    doc.verdict("subprincipal_multiplicative", sub, pairs_note);
    let s = symbol(&e).to_string();
    doc.verdict("symbol_of_Tx", s == "x*xi", s);
    let l = localize_t(&e);
    doc.verdict("localization_of_Tx", l == parse_weyl(1, "d*x")?, l.to_string());
    Ok(())
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                return (0, e.to_string());
            }
            eprint!("{e}");
            return (2, String::new());
        }
    };
    match limits::max_basis_from_env() {
        Ok(n) => limits::set_max_basis(n),
        Err(v) => return fail(&cli, request(&cli), Failure::input(format!("{} must be a count, got `{v}`", limits::MAX_BASIS_ENV))),
    }
    par::set_parallel(cli.parallel == Switch::On);
    let req = request(&cli);
    if cli.min_degree > cli.max_degree {
        return fail(&cli, req, Failure::input("empty degree window: --min-degree exceeds --max-degree"));
    }
    let mut doc = ResultDocument::new(req.clone());
    match execute(&cli, &mut doc) {
        Ok(()) => (0, emit(&doc, cli.format)),
        Err(f) if f.code == 3 => {
            eprintln!("verification failed: {}", f.message);
            let mut out = emit(&doc, cli.format);
            if cli.format == Format::Json {
                out = error_json(&req, &f, Some(&doc));
            }
            (3, out)
        }
        Err(f) => fail(&cli, req, f),
    }
}

fn error_json(req: &BTreeMap<String, Value>, f: &Failure, doc: Option<&ResultDocument>) -> String {
    let mut v = json!({
        "error": {"kind": f.kind, "message": f.message},
        "request": req,
        "tables": [],
        "verdicts": {},
        "version": SCHEMA_VERSION,
    });
    if let Some(d) = doc {
        v["tables"] = serde_json::to_value(&d.tables).expect("rows serialize");
        v["verdicts"] = serde_json::to_value(&d.verdicts).expect("verdicts serialize");
    }
    let mut s = serde_json::to_string_pretty(&v).expect("errors serialize");
    s.push('\n');
    s
}

fn fail(cli: &Cli, req: BTreeMap<String, Value>, f: Failure) -> (i32, String) {
    eprintln!("error: {}", f.message);
    let out = if cli.format == Format::Json { error_json(&req, &f, None) } else { String::new() };
    (f.code, out)
}
