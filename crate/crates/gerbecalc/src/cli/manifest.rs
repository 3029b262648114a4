//! Line-oriented scenario manifests.
//!
//! ```text
//! scenario "<name>"
//! manifold torus dim=<1|2|3> grid=<int> margin=<float>
//! samples count=<int> seed=<int>
//! tolerance pointwise=<float> quadrature=<float> double_quadrature=<float>
//! gerbe <id> = trivial | coboundary seed=<int> beta="<2-form expr>"
//! twist1 <id> = random seed=<int> | identity
//! bundle <id> on <gerbe-id> = trivial rank=<int> | line k=<int>
//!                           | sum <id> <id> | gauge <id> seed=<int>
//!                           | transport <id> by <twist1-id>
//! connection <id> on <bundle-id> = standard | perturb <id> seed=<int> amp=<float>
//!                                | transport <id> by <twist1-id>
//!                                | shiftxi <id> xi="<2-form expr>"
//! path <id> = affine <conn-id> <conn-id> | gaugepath <conn-id> phi_seed=<int>
//! form <id> deg=<int> = "<expr with dx wedges>"
//! check <name> <args...>
//! ```
//!
//! `#` starts a comment; whitespace separates tokens; string values are
//! double-quoted. Form literals are sums of `(expr) dxI^dxJ` terms.

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

use crate::calculus::expr::{parse_expr, Expr, ExprRef};
use crate::deligne::ScalarCoeffs;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifestError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate name `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: unresolved reference `{name}`")]
    Unresolved { line: usize, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub pointwise: f64,
    pub quadrature: f64,
    pub double_quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pointwise: 1e-8,
            quadrature: 1e-6,
            double_quadrature: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GerbeSpec {
    Trivial,
    Coboundary { seed: u64, beta: FormLiteral },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TwistSpec {
    Random { seed: u64 },
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BundleSpec {
    Trivial { rank: usize },
    Line { k: i64 },
    Sum(String, String),
    Gauge { base: String, seed: u64 },
    Transport { base: String, twist: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConnSpec {
    Standard,
    Perturb { base: String, seed: u64, amp: f64 },
    Transport { base: String, twist: String },
    ShiftXi { base: String, xi: FormLiteral },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathSpec {
    Affine(String, String),
    GaugePath { conn: String, phi_seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Gerbe {
        id: String,
        spec: GerbeSpec,
    },
    Twist {
        id: String,
        spec: TwistSpec,
    },
    Bundle {
        id: String,
        gerbe: String,
        spec: BundleSpec,
    },
    Connection {
        id: String,
        bundle: String,
        spec: ConnSpec,
    },
    Path {
        id: String,
        spec: PathSpec,
    },
    Form {
        id: String,
        deg: usize,
        literal: FormLiteral,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckDecl {
    pub line: usize,
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub scenario: String,
    pub dim: usize,
    pub grid: usize,
    pub margin: f64,
    pub samples: usize,
    pub seed: u64,
    pub tol: Tolerances,
    pub decls: Vec<Decl>,
    pub checks: Vec<CheckDecl>,
}

/// A parsed scalar form literal: canonical increasing tuples -> expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct FormLiteral {
    pub coeffs: ScalarCoeffs,
}

impl FormLiteral {
    pub fn degree_set(&self) -> Vec<usize> {
        let mut degs: Vec<usize> = self.coeffs.keys().map(|k| k.len()).collect();
        degs.sort_unstable();
        degs.dedup();
        degs
    }
}

impl fmt::Display for FormLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "(0)");
        }
        let mut first = true;
        for (tuple, e) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", e)?;
            for (pos, idx) in tuple.iter().enumerate() {
                write!(f, "{}dx{}", if pos == 0 { " " } else { "^" }, idx + 1)?;
            }
        }
        Ok(())
    }
}

/// Parse `(expr) dx1^dx2 + ... - ...` into canonical coefficients.
pub fn parse_form_literal(text: &str, dim: usize) -> Result<FormLiteral, String> {
    let mut coeffs = ScalarCoeffs::new();
    let mut rest = text.trim();
    let mut sign = 1.0f64;
    let mut first = true;
    while !rest.is_empty() {
        if !first {
            if let Some(r) = rest.strip_prefix('+') {
                sign = 1.0;
                rest = r.trim_start();
            } else if let Some(r) = rest.strip_prefix('-') {
                sign = -1.0;
                rest = r.trim_start();
            } else {
                return Err(format!("expected `+` or `-` before `{rest}`"));
            }
        }
        first = false;
        // coefficient
        let coeff: ExprRef = if rest.starts_with('(') {
            let close = matching_paren(rest).ok_or("unbalanced parenthesis")?;
            let inner = &rest[1..close];
            rest = rest[close + 1..].trim_start();
            parse_expr(inner).map_err(|e| e.to_string())?
        } else if rest
            .chars()
            .next()
            .map(|c| c.is_ascii_digit() || c == '.')
            .unwrap_or(false)
        {
            let end = rest
                .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == '-'))
                .unwrap_or(rest.len());
            let (num, r) = rest.split_at(end);
            rest = r.trim_start();
            parse_expr(num).map_err(|e| e.to_string())?
        } else {
            Expr::one()
        };
        // wedge factors
        let mut tuple: Vec<u8> = Vec::new();
        loop {
            if let Some(r) = rest.strip_prefix("dx") {
                let d = r
                    .chars()
                    .next()
                    .and_then(|c| c.to_digit(10))
                    .ok_or("expected digit after dx")? as usize;
                if d == 0 || d > dim {
                    return Err(format!("dx{d} out of range for dimension {dim}"));
                }
                tuple.push((d - 1) as u8);
                rest = r[1..].trim_start();
                if let Some(r2) = rest.strip_prefix('^') {
                    rest = r2.trim_start();
                    continue;
                }
            }
            break;
        }
        // canonicalize the tuple by sorting with sign
        let mut perm_sign = 1.0f64;
        let mut sorted = tuple.clone();
        for i in 0..sorted.len() {
            for j in (i + 1)..sorted.len() {
                if sorted[i] > sorted[j] {
                    sorted.swap(i, j);
                    perm_sign = -perm_sign;
                }
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            continue; // repeated dx: the term vanishes
        }
        let signed = Expr::mul(&Expr::real(sign * perm_sign), &coeff);
        let cur = coeffs.get(&sorted).cloned().unwrap_or_else(Expr::zero);
        coeffs.insert(sorted, Expr::add(&cur, &signed));
    }
    Ok(FormLiteral { coeffs })
}

fn matching_paren(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

// ---------------------------------------------------------------------------
// tokenizer
// ---------------------------------------------------------------------------

/// Split a line into tokens, keeping double-quoted strings as single tokens
/// (without the quotes).
fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            break;
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(c) => s.push(c),
                    None => return Err("unterminated string".into()),
                }
            }
            out.push(s);
        } else {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || c == '"' || c == '#' {
                    break;
                }
                s.push(c);
                chars.next();
            }
            out.push(s);
        }
    }
    Ok(out)
}

fn kv<'a>(tokens: &'a [String], key: &str) -> Option<&'a str> {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(&format!("{key}=")))
}

fn need_kv<T: std::str::FromStr>(
    tokens: &[String],
    key: &str,
    line: usize,
) -> Result<T, ManifestError> {
    let raw = kv(tokens, key).ok_or_else(|| ManifestError::Syntax {
        line,
        message: format!("missing `{key}=`"),
    })?;
    raw.parse().map_err(|_| ManifestError::Syntax {
        line,
        message: format!("bad value for `{key}`: {raw}"),
    })
}

// ---------------------------------------------------------------------------
// parser
// ---------------------------------------------------------------------------

/// The closed set of check names a manifest may reference.
pub const CHECK_NAMES: [&str; 18] = [
    "validate_gerbe",
    "validate_bundle",
    "validate_connection",
    "ch_closed",
    "ch_glue",
    "ch_additive",
    "ch_rescale",
    "transgression",
    "bigon",
    "cs_gauge",
    "odd_chern_winding",
    "stokes_fiber",
    "hexagon",
    "certificate",
    "dd_class",
    "cohomology",
    "chern_number",
    "twist_compat",
];

pub fn parse_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let mut scenario = String::from("unnamed");
    let mut dim = 2usize;
    let mut grid = 3usize;
    let mut margin = 0.05f64;
    let mut samples = 200usize;
    let mut seed = 1u64;
    let mut tol = Tolerances::default();
    let mut decls = Vec::new();
    let mut checks = Vec::new();
    let mut names: BTreeMap<(&'static str, String), usize> = BTreeMap::new();

    let err = |line: usize, message: String| ManifestError::Syntax { line, message };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens = tokenize(raw).map_err(|m| err(line, m))?;
        if tokens.is_empty() {
            continue;
        }
        let head = tokens[0].as_str();
        let rest = &tokens[1..];
        match head {
            "scenario" => {
                scenario = rest
                    .first()
                    .cloned()
                    .ok_or_else(|| err(line, "scenario needs a name".into()))?;
            }
            "manifold" => {
                if rest.first().map(String::as_str) != Some("torus") {
                    return Err(err(line, "only `manifold torus` is supported".into()));
                }
                dim = need_kv(rest, "dim", line)?;
                grid = need_kv(rest, "grid", line)?;
                margin = need_kv(rest, "margin", line)?;
            }
            "samples" => {
                samples = need_kv(rest, "count", line)?;
                seed = need_kv(rest, "seed", line)?;
            }
            "tolerance" => {
                if let Some(v) = kv(rest, "pointwise") {
                    tol.pointwise = v.parse().map_err(|_| err(line, "bad pointwise".into()))?;
                }
                if let Some(v) = kv(rest, "quadrature") {
                    tol.quadrature = v.parse().map_err(|_| err(line, "bad quadrature".into()))?;
                }
                if let Some(v) = kv(rest, "double_quadrature") {
                    tol.double_quadrature = v
                        .parse()
                        .map_err(|_| err(line, "bad double_quadrature".into()))?;
                }
            }
            "gerbe" | "twist1" | "path" | "form" => {
                let id = rest
                    .first()
                    .cloned()
                    .ok_or_else(|| err(line, format!("{head} needs a name")))?;
                let eq = rest.iter().position(|t| t == "=");
                let (meta, body) = match eq {
                    Some(p) => (&rest[1..p], &rest[p + 1..]),
                    None if head == "form" => {
                        return Err(err(line, "form needs `= \"...\"`".into()))
                    }
                    None => {
                        return Err(err(line, format!("{head} needs `= <spec>`")));
                    }
                };
                let kind: &'static str = match head {
                    "gerbe" => "gerbe",
                    "twist1" => "twist1",
                    "path" => "path",
                    _ => "form",
                };
                if names.insert((kind, id.clone()), line).is_some() {
                    return Err(ManifestError::Duplicate { line, name: id });
                }
                match head {
                    "gerbe" => {
                        let spec = match body.first().map(String::as_str) {
                            Some("trivial") => GerbeSpec::Trivial,
                            Some("coboundary") => {
                                let seed = need_kv(body, "seed", line)?;
                                let beta_text = kv(body, "beta").unwrap_or("");
                                let beta =
                                    parse_form_literal(beta_text, dim).map_err(|m| err(line, m))?;
                                GerbeSpec::Coboundary { seed, beta }
                            }
                            other => {
                                return Err(err(line, format!("unknown gerbe spec {other:?}")))
                            }
                        };
                        decls.push(Decl::Gerbe { id, spec });
                    }
                    "twist1" => {
                        let spec = match body.first().map(String::as_str) {
                            Some("random") => TwistSpec::Random {
                                seed: need_kv(body, "seed", line)?,
                            },
                            Some("identity") => TwistSpec::Identity,
                            other => {
                                return Err(err(line, format!("unknown twist spec {other:?}")))
                            }
                        };
                        decls.push(Decl::Twist { id, spec });
                    }
                    "path" => {
                        let spec = match body.first().map(String::as_str) {
                            Some("affine") => {
                                let a = body.get(1).cloned().ok_or_else(|| {
                                    err(line, "affine needs two connections".into())
                                })?;
                                let b = body.get(2).cloned().ok_or_else(|| {
                                    err(line, "affine needs two connections".into())
                                })?;
                                PathSpec::Affine(a, b)
                            }
                            Some("gaugepath") => {
                                let conn = body.get(1).cloned().ok_or_else(|| {
                                    err(line, "gaugepath needs a connection".into())
                                })?;
                                PathSpec::GaugePath {
                                    conn,
                                    phi_seed: need_kv(body, "phi_seed", line)?,
                                }
                            }
                            other => return Err(err(line, format!("unknown path spec {other:?}"))),
                        };
                        decls.push(Decl::Path { id, spec });
                    }
                    _ => {
                        let deg: usize = need_kv(meta, "deg", line)?;
                        let text = body
                            .first()
                            .cloned()
                            .ok_or_else(|| err(line, "form needs a quoted literal".into()))?;
                        let literal = parse_form_literal(&text, dim).map_err(|m| err(line, m))?;
                        if literal.coeffs.keys().any(|t| t.len() != deg) {
                            return Err(err(
                                line,
                                format!("form terms do not all have degree {deg}"),
                            ));
                        }
                        decls.push(Decl::Form { id, deg, literal });
                    }
                }
            }
            "bundle" | "connection" => {
                let id = rest
                    .first()
                    .cloned()
                    .ok_or_else(|| err(line, format!("{head} needs a name")))?;
                if rest.get(1).map(String::as_str) != Some("on") {
                    return Err(err(line, format!("{head} needs `on <id>`")));
                }
                let host = rest
                    .get(2)
                    .cloned()
                    .ok_or_else(|| err(line, "missing host id".into()))?;
                let eq = rest
                    .iter()
                    .position(|t| t == "=")
                    .ok_or_else(|| err(line, "missing `=`".into()))?;
                let body = &rest[eq + 1..];
                let kind: &'static str = if head == "bundle" {
                    "bundle"
                } else {
                    "connection"
                };
                if names.insert((kind, id.clone()), line).is_some() {
                    return Err(ManifestError::Duplicate { line, name: id });
                }
                if head == "bundle" {
                    let spec = match body.first().map(String::as_str) {
                        Some("trivial") => BundleSpec::Trivial {
                            rank: need_kv(body, "rank", line)?,
                        },
                        Some("line") => BundleSpec::Line {
                            k: need_kv(body, "k", line)?,
                        },
                        Some("sum") => BundleSpec::Sum(
                            body.get(1)
                                .cloned()
                                .ok_or_else(|| err(line, "sum needs two bundles".into()))?,
                            body.get(2)
                                .cloned()
                                .ok_or_else(|| err(line, "sum needs two bundles".into()))?,
                        ),
                        Some("gauge") => BundleSpec::Gauge {
                            base: body
                                .get(1)
                                .cloned()
                                .ok_or_else(|| err(line, "gauge needs a base".into()))?,
                            seed: need_kv(body, "seed", line)?,
                        },
                        Some("transport") => BundleSpec::Transport {
                            base: body
                                .get(1)
                                .cloned()
                                .ok_or_else(|| err(line, "transport needs a base".into()))?,
                            twist: transport_twist_id(body, line)?,
                        },
                        other => return Err(err(line, format!("unknown bundle spec {other:?}"))),
                    };
                    decls.push(Decl::Bundle {
                        id,
                        gerbe: host,
                        spec,
                    });
                } else {
                    let spec = match body.first().map(String::as_str) {
                        Some("standard") => ConnSpec::Standard,
                        Some("perturb") => ConnSpec::Perturb {
                            base: body
                                .get(1)
                                .cloned()
                                .ok_or_else(|| err(line, "perturb needs a base".into()))?,
                            seed: need_kv(body, "seed", line)?,
                            amp: need_kv(body, "amp", line)?,
                        },
                        Some("transport") => ConnSpec::Transport {
                            base: body
                                .get(1)
                                .cloned()
                                .ok_or_else(|| err(line, "transport needs a base".into()))?,
                            twist: transport_twist_id(body, line)?,
                        },
                        Some("shiftxi") => {
                            let base = body
                                .get(1)
                                .cloned()
                                .ok_or_else(|| err(line, "shiftxi needs a base".into()))?;
                            let xi_text = kv(body, "xi")
                                .ok_or_else(|| err(line, "shiftxi needs xi=\"...\"".into()))?;
                            ConnSpec::ShiftXi {
                                base,
                                xi: parse_form_literal(xi_text, dim).map_err(|m| err(line, m))?,
                            }
                        }
                        other => {
                            return Err(err(line, format!("unknown connection spec {other:?}")))
                        }
                    };
                    decls.push(Decl::Connection {
                        id,
                        bundle: host,
                        spec,
                    });
                }
            }
            "check" => {
                let name = rest
                    .first()
                    .cloned()
                    .ok_or_else(|| err(line, "check needs a name".into()))?;
                if !CHECK_NAMES.contains(&name.as_str()) {
                    return Err(err(line, format!("unknown check name `{name}`")));
                }
                checks.push(CheckDecl {
                    line,
                    name,
                    args: rest[1..].to_vec(),
                });
            }
            other => {
                return Err(err(line, format!("unknown directive `{other}`")));
            }
        }
    }

    let manifest = Manifest {
        scenario,
        dim,
        grid,
        margin,
        samples,
        seed,
        tol,
        decls,
        checks,
    };
    validate_references(&manifest)?;
    Ok(manifest)
}

fn transport_twist_id(body: &[String], line: usize) -> Result<String, ManifestError> {
    let by = body
        .iter()
        .position(|t| t == "by")
        .ok_or(ManifestError::Syntax {
            line,
            message: "transport needs `by <twist1-id>`".into(),
        })?;
    body.get(by + 1).cloned().ok_or(ManifestError::Syntax {
        line,
        message: "transport needs `by <twist1-id>`".into(),
    })
}

fn validate_references(m: &Manifest) -> Result<(), ManifestError> {
    use std::collections::BTreeSet;
    let mut gerbes = BTreeSet::new();
    let mut twists = BTreeSet::new();
    let mut bundles = BTreeSet::new();
    let mut conns = BTreeSet::new();
    let mut paths = BTreeSet::new();
    let mut forms = BTreeSet::new();
    let missing = |name: &str| ManifestError::Unresolved {
        line: 0,
        name: name.to_string(),
    };
    for d in &m.decls {
        match d {
            Decl::Gerbe { id, .. } => {
                gerbes.insert(id.clone());
            }
            Decl::Twist { id, .. } => {
                twists.insert(id.clone());
            }
            Decl::Form { id, .. } => {
                forms.insert(id.clone());
            }
            Decl::Bundle { id, gerbe, spec } => {
                if !gerbes.contains(gerbe) {
                    return Err(missing(gerbe));
                }
                match spec {
                    BundleSpec::Sum(a, b) => {
                        if !bundles.contains(a) {
                            return Err(missing(a));
                        }
                        if !bundles.contains(b) {
                            return Err(missing(b));
                        }
                    }
                    BundleSpec::Gauge { base, .. } => {
                        if !bundles.contains(base) {
                            return Err(missing(base));
                        }
                    }
                    BundleSpec::Transport { base, twist } => {
                        if !bundles.contains(base) {
                            return Err(missing(base));
                        }
                        if !twists.contains(twist) {
                            return Err(missing(twist));
                        }
                    }
                    _ => {}
                }
                bundles.insert(id.clone());
            }
            Decl::Connection { id, bundle, spec } => {
                if !bundles.contains(bundle) {
                    return Err(missing(bundle));
                }
                match spec {
                    ConnSpec::Perturb { base, .. } | ConnSpec::ShiftXi { base, .. } => {
                        if !conns.contains(base) {
                            return Err(missing(base));
                        }
                    }
                    ConnSpec::Transport { base, twist } => {
                        if !conns.contains(base) {
                            return Err(missing(base));
                        }
                        if !twists.contains(twist) {
                            return Err(missing(twist));
                        }
                    }
                    ConnSpec::Standard => {}
                }
                conns.insert(id.clone());
            }
            Decl::Path { id, spec } => {
                match spec {
                    PathSpec::Affine(a, b) => {
                        if !conns.contains(a) {
                            return Err(missing(a));
                        }
                        if !conns.contains(b) {
                            return Err(missing(b));
                        }
                    }
                    PathSpec::GaugePath { conn, .. } => {
                        if !conns.contains(conn) {
                            return Err(missing(conn));
                        }
                    }
                }
                paths.insert(id.clone());
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// printing (round-trip support)
// ---------------------------------------------------------------------------

impl fmt::Display for Manifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario \"{}\"", self.scenario)?;
        writeln!(
            f,
            "manifold torus dim={} grid={} margin={}",
            self.dim, self.grid, self.margin
        )?;
        writeln!(f, "samples count={} seed={}", self.samples, self.seed)?;
        writeln!(
            f,
            "tolerance pointwise={:e} quadrature={:e} double_quadrature={:e}",
            self.tol.pointwise, self.tol.quadrature, self.tol.double_quadrature
        )?;
        for d in &self.decls {
            match d {
                Decl::Gerbe { id, spec } => match spec {
                    GerbeSpec::Trivial => writeln!(f, "gerbe {id} = trivial")?,
                    GerbeSpec::Coboundary { seed, beta } => {
                        writeln!(f, "gerbe {id} = coboundary seed={seed} beta=\"{beta}\"")?
                    }
                },
                Decl::Twist { id, spec } => match spec {
                    TwistSpec::Random { seed } => writeln!(f, "twist1 {id} = random seed={seed}")?,
                    TwistSpec::Identity => writeln!(f, "twist1 {id} = identity")?,
                },
                Decl::Bundle { id, gerbe, spec } => match spec {
                    BundleSpec::Trivial { rank } => {
                        writeln!(f, "bundle {id} on {gerbe} = trivial rank={rank}")?
                    }
                    BundleSpec::Line { k } => writeln!(f, "bundle {id} on {gerbe} = line k={k}")?,
                    BundleSpec::Sum(a, b) => writeln!(f, "bundle {id} on {gerbe} = sum {a} {b}")?,
                    BundleSpec::Gauge { base, seed } => {
                        writeln!(f, "bundle {id} on {gerbe} = gauge {base} seed={seed}")?
                    }
                    BundleSpec::Transport { base, twist } => {
                        writeln!(f, "bundle {id} on {gerbe} = transport {base} by {twist}")?
                    }
                },
                Decl::Connection { id, bundle, spec } => match spec {
                    ConnSpec::Standard => writeln!(f, "connection {id} on {bundle} = standard")?,
                    ConnSpec::Perturb { base, seed, amp } => writeln!(
                        f,
                        "connection {id} on {bundle} = perturb {base} seed={seed} amp={amp}"
                    )?,
                    ConnSpec::Transport { base, twist } => writeln!(
                        f,
                        "connection {id} on {bundle} = transport {base} by {twist}"
                    )?,
                    ConnSpec::ShiftXi { base, xi } => writeln!(
                        f,
                        "connection {id} on {bundle} = shiftxi {base} xi=\"{xi}\""
                    )?,
                },
                Decl::Path { id, spec } => match spec {
                    PathSpec::Affine(a, b) => writeln!(f, "path {id} = affine {a} {b}")?,
                    PathSpec::GaugePath { conn, phi_seed } => {
                        writeln!(f, "path {id} = gaugepath {conn} phi_seed={phi_seed}")?
                    }
                },
                Decl::Form { id, deg, literal } => {
                    writeln!(f, "form {id} deg={deg} = \"{literal}\"")?
                }
            }
        }
        for c in &self.checks {
            write!(f, "check {}", c.name)?;
            for a in &c.args {
                write!(f, " {a}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
scenario "demo"
manifold torus dim=2 grid=3 margin=0.05
samples count=50 seed=7
gerbe g0 = trivial
gerbe g1 = coboundary seed=3 beta="(sin(2*pi*x1)) dx1^dx2"
twist1 t1 = random seed=3
bundle e1 on g0 = line k=1
bundle e2 on g0 = line k=-1
bundle e3 on g0 = sum e1 e2
bundle e4 on g1 = transport e1 by t1
connection c1 on e1 = standard
connection c2 on e1 = perturb c1 seed=9 amp=0.5
path p1 = affine c1 c2
form xi deg=2 = "(cos(2*pi*x2)) dx1^dx2"
check validate_gerbe g1
check transgression p1
"#;

    #[test]
    fn parses_a_full_manifest() {
        let m = parse_manifest(SAMPLE).unwrap();
        assert_eq!(m.scenario, "demo");
        assert_eq!(m.dim, 2);
        assert_eq!(m.decls.len(), 11);
        assert_eq!(m.checks.len(), 2);
    }

    #[test]
    fn unknown_check_name_is_reported_with_line() {
        let bad = format!("{SAMPLE}check frobnicate g0\n");
        match parse_manifest(&bad) {
            Err(ManifestError::Syntax { line, message }) => {
                assert!(message.contains("frobnicate"));
                assert!(line > 10);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_check_target_is_reported_with_line() {
        let bad = "manifold torus dim=2 grid=3 margin=0.05\nbundle e1 on nope = trivial rank=1\n";
        match parse_manifest(bad) {
            Err(ManifestError::Unresolved { name, .. }) => assert_eq!(name, "nope"),
            other => panic!("expected unresolved reference, got {other:?}"),
        }
        let bad = "manifold torus dim=2 grid=3 margin=0.05\nwhatever x\n";
        match parse_manifest(bad) {
            Err(ManifestError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let bad = "gerbe g = trivial\ngerbe g = trivial\n";
        assert!(matches!(
            parse_manifest(bad),
            Err(ManifestError::Duplicate { .. })
        ));
    }

    #[test]
    fn print_parse_round_trip_is_stable() {
        let m1 = parse_manifest(SAMPLE).unwrap();
        let printed = m1.to_string();
        let m2 = parse_manifest(&printed).unwrap();
        let printed2 = m2.to_string();
        assert_eq!(printed, printed2, "printing is not idempotent");
    }

    #[test]
    fn form_literals_canonicalize_orientation() {
        // dx2^dx1 = -dx1^dx2
        let a = parse_form_literal("(x1) dx2^dx1", 2).unwrap();
        let b = parse_form_literal("(0 - x1) dx1^dx2", 2).unwrap();
        let pa = a.coeffs.get(&vec![0, 1]).unwrap();
        let _pb = b.coeffs.get(&vec![0, 1]).unwrap();
        let ctx = crate::calculus::jet::EvalCtx::space(2);
        let va = crate::calculus::jet::eval_value(pa, &[0.3, 0.4], &ctx).unwrap();
        assert!((va.re + 0.3).abs() < 1e-15);
    }
}
