//! Abstract syntax of programs, enriched terms and assertion formulas.
//!
//! Terms and formulas use named binders; alpha-equivalence ([`crate::subst::alpha_eq_expr`])
//! is the only term equality the checker relies on. Macro nodes (`Pr`, `Var`, `Er`,
//! lifted assertions, sup/Lipschitz/Wasserstein equations) are eliminated by
//! [`crate::desugar`].

use crate::types::TypeTerm;
use num_bigint::BigInt;
use num_rational::BigRational;

pub type Name = String;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Const {
    /// Exact rational literal. Integer-ness is a typing matter.
    Rat(BigRational),
    Bool(bool),
    Unit,
    /// `inf` at type `preal`.
    Infinity,
    /// Symbolic circle constant, left uninterpreted.
    Pi,
    /// Symbolic Euler constant, left uninterpreted.
    Euler,
    /// Empty list; element type comes from an ascription or context.
    Nil,
}

impl Const {
    pub fn int(n: i64) -> Const {
        Const::Rat(BigRational::from(BigInt::from(n)))
    }
    pub fn rat(n: i64, d: i64) -> Const {
        Const::Rat(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }
}

/// Primitive function symbols. Numeric ones are overloaded over int/real/preal;
/// the typechecker resolves each occurrence from its operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prim {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    /// `psub : preal -> preal -> real`, difference of positive and negative
    /// parts; unconstrained when both arguments are infinite.
    PSub,
    Abs,
    Min,
    Max,
    Sqrt,
    Exp,
    Log,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Not,
    /// List length.
    Len,
    Cons,
    /// Coercion int -> real (ring homomorphism).
    IntToReal,
    /// Coercion real -> preal, meaningful on nonnegative values.
    RealToPReal,
    /// Divergence functional `kl : M[real] -> M[real] -> real`, characterized
    /// by the density equation and by named closed-form facts.
    Kl,
}

impl Prim {
    pub fn symbol(self) -> &'static str {
        match self {
            Prim::Add => "+",
            Prim::Sub => "-",
            Prim::Mul => "*",
            Prim::Div => "/",
            Prim::Neg => "neg",
            Prim::PSub => "psub",
            Prim::Abs => "abs",
            Prim::Min => "min",
            Prim::Max => "max",
            Prim::Sqrt => "sqrt",
            Prim::Exp => "exp",
            Prim::Log => "log",
            Prim::Lt => "<",
            Prim::Le => "<=",
            Prim::Gt => ">",
            Prim::Ge => ">=",
            Prim::And => "&&",
            Prim::Or => "||",
            Prim::Not => "not",
            Prim::Len => "len",
            Prim::Cons => "::",
            Prim::IntToReal => "int2real",
            Prim::RealToPReal => "preal",
            Prim::Kl => "kl",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Prim::Neg
            | Prim::Abs
            | Prim::Sqrt
            | Prim::Exp
            | Prim::Log
            | Prim::Not
            | Prim::Len
            | Prim::IntToReal
            | Prim::RealToPReal => 1,
            _ => 2,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Prim::Lt | Prim::Le | Prim::Gt | Prim::Ge)
    }
}

#[derive(Debug, Clone)]
pub enum CaseArms {
    /// `if`-style elimination of a bool scrutinee.
    Bool { tt: Box<Expr>, ff: Box<Expr> },
    /// `case e with [] -> nil | y :: ys -> cons`.
    List {
        nil: Box<Expr>,
        head: Name,
        tail: Name,
        cons: Box<Expr>,
    },
    /// `case e with <a, b> -> body`.
    Pair {
        fst: Name,
        snd: Name,
        body: Box<Expr>,
    },
}

#[derive(Debug, Clone)]
pub enum Expr {
    Var(Name),
    Const(Const),
    /// Fully applied primitive (arity fixed per symbol).
    Prim(Prim, Vec<Expr>),
    App(Box<Expr>, Box<Expr>),
    Lam(Name, TypeTerm, Box<Expr>),
    Pair(Box<Expr>, Box<Expr>),
    /// Projection, index 1 or 2.
    Proj(u8, Box<Expr>),
    Case(Box<Expr>, CaseArms),
    /// `letrec f (x : I) : sigma = body`.
    Letrec {
        f: Name,
        x: Name,
        dom: TypeTerm,
        cod: TypeTerm,
        body: Box<Expr>,
    },
    Ret(Box<Expr>),
    Bind(Box<Expr>, Box<Expr>),
    Observe(Box<Expr>, Box<Expr>),
    Uniform(Box<Expr>, Box<Expr>),
    Bern(Box<Expr>),
    Gauss(Box<Expr>, Box<Expr>),
    /// The Lebesgue base measure on the reals (symbolic only).
    Lebesgue,
    /// Gaussian density constant `GPDF(mean, variance) : real -> preal`.
    Gpdf(Box<Expr>, Box<Expr>),
    /// Expectation `E[x ~ src](body)` of a preal-valued body.
    Expect {
        binder: Name,
        src: Box<Expr>,
        body: Box<Expr>,
    },
    Scale(Box<Expr>, Box<Expr>),
    Normalize(Box<Expr>),
    /// Type ascription `(e : T)`.
    Ascribe(Box<Expr>, TypeTerm),

    // ---- macro nodes, eliminated by desugar ----
    /// `Pr[x ~ e](event)` with a bool-valued event expression.
    MacPr {
        binder: Name,
        src: Box<Expr>,
        event: Box<Expr>,
    },
    /// `Er[x ~ e](t)`: expectation of a real-valued body.
    MacEr {
        binder: Name,
        src: Box<Expr>,
        body: Box<Expr>,
    },
    /// `Var[x ~ e](t)`.
    MacVar {
        binder: Name,
        src: Box<Expr>,
        body: Box<Expr>,
    },
    /// `let x = e1 in e2`, sugar for `(fun x : T -> e2) e1`; the annotation is
    /// optional in the surface syntax and elaborated by the typechecker.
    MacLet {
        x: Name,
        ann: Option<TypeTerm>,
        rhs: Box<Expr>,
        body: Box<Expr>,
    },
    /// `mlet x = e1 in e2`, sugar for `bind e1 (fun x -> e2)`.
    MacMlet {
        x: Name,
        ann: Option<TypeTerm>,
        rhs: Box<Expr>,
        body: Box<Expr>,
    },
    /// `e1 (*) e2`, the product measure sugar.
    MacTensor(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(s: &str) -> Expr {
        Expr::Var(s.to_string())
    }
    pub fn int(n: i64) -> Expr {
        Expr::Const(Const::int(n))
    }
    pub fn rat(n: i64, d: i64) -> Expr {
        Expr::Const(Const::rat(n, d))
    }
    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(a))
    }
    pub fn lam(x: &str, t: TypeTerm, b: Expr) -> Expr {
        Expr::Lam(x.to_string(), t, Box::new(b))
    }
    pub fn ret(e: Expr) -> Expr {
        Expr::Ret(Box::new(e))
    }
    pub fn bind(e: Expr, f: Expr) -> Expr {
        Expr::Bind(Box::new(e), Box::new(f))
    }
    pub fn pair(a: Expr, b: Expr) -> Expr {
        Expr::Pair(Box::new(a), Box::new(b))
    }
    pub fn proj(i: u8, e: Expr) -> Expr {
        Expr::Proj(i, Box::new(e))
    }
    pub fn prim(p: Prim, args: Vec<Expr>) -> Expr {
        debug_assert_eq!(p.arity(), args.len());
        Expr::Prim(p, args)
    }
    pub fn expect(x: &str, src: Expr, body: Expr) -> Expr {
        Expr::Expect {
            binder: x.to_string(),
            src: Box::new(src),
            body: Box::new(body),
        }
    }
    pub fn if_then_else(b: Expr, tt: Expr, ff: Expr) -> Expr {
        Expr::Case(
            Box::new(b),
            CaseArms::Bool {
                tt: Box::new(tt),
                ff: Box::new(ff),
            },
        )
    }
    pub fn one() -> Expr {
        Expr::int(1)
    }
    pub fn zero() -> Expr {
        Expr::int(0)
    }

    /// Mass of a measure term: `E[y ~ e](1)`.
    pub fn mass(e: Expr) -> Expr {
        Expr::expect("mass_y", e, Expr::one())
    }
}

#[derive(Debug, Clone)]
pub enum Formula {
    Eq(Expr, Expr),
    Lt(Expr, Expr),
    Top,
    Bot,
    And(Box<Formula>, Box<Formula>),
    Imp(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    Forall(Name, TypeTerm, Box<Formula>),
    Exists(Name, TypeTerm, Box<Formula>),

    // ---- macro nodes, eliminated by desugar ----
    /// `a <= b`, sugar for `~(b < a)`.
    MacLe(Expr, Expr),
    /// `phi <-> psi`, sugar for the conjunction of both implications.
    MacIff(Box<Formula>, Box<Formula>),
    /// `target = sup x : ty st cond. body`.
    MacSup {
        target: Expr,
        binder: Name,
        ty: TypeTerm,
        cond: Box<Formula>,
        body: Expr,
    },
    /// `target = lipk(dom_metric, cod_metric, func)` over `arg_ty`.
    MacLip {
        target: Expr,
        arg_ty: TypeTerm,
        dom_metric: Expr,
        cod_metric: Expr,
        func: Expr,
    },
    /// `target = wass(metric, mu1, mu2)` over `arg_ty`.
    MacWass {
        target: Expr,
        arg_ty: TypeTerm,
        metric: Expr,
        mu1: Expr,
        mu2: Expr,
    },
    /// Density characterization of the divergence functional:
    /// `(d1 = scale(d2, f)) => kl(d1, d2) = Er[x ~ d1](log (f x))`.
    MacKlDef { d1: Expr, d2: Expr, density: Expr },
    /// `U(param, grade, tau, phi)`: unary lifting of `phi` over `r'` at
    /// subject type `tau`.
    MacULift {
        param: Name,
        grade: Expr,
        val_ty: TypeTerm,
        body: Box<Formula>,
    },
    /// `R(param, grade, tau1, tau2, phi)`: relational lifting of `phi` over
    /// `r1'`/`r2'`.
    MacRLift {
        param: Name,
        grade: Expr,
        val_ty1: TypeTerm,
        val_ty2: TypeTerm,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn eq(a: Expr, b: Expr) -> Formula {
        Formula::Eq(a, b)
    }
    pub fn lt(a: Expr, b: Expr) -> Formula {
        Formula::Lt(a, b)
    }
    pub fn le(a: Expr, b: Expr) -> Formula {
        Formula::Not(Box::new(Formula::Lt(b, a)))
    }
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn imp(a: Formula, b: Formula) -> Formula {
        Formula::Imp(Box::new(a), Box::new(b))
    }
    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }
    pub fn forall(x: &str, t: TypeTerm, b: Formula) -> Formula {
        Formula::Forall(x.to_string(), t, Box::new(b))
    }
    pub fn exists(x: &str, t: TypeTerm, b: Formula) -> Formula {
        Formula::Exists(x.to_string(), t, Box::new(b))
    }

    /// Conjunction of a nonempty list, right-nested.
    pub fn conj(mut fs: Vec<Formula>) -> Formula {
        let last = fs.pop().expect("conj of empty list");
        fs.into_iter()
            .rev()
            .fold(last, |acc, f| Formula::and(f, acc))
    }
}

/// A typing context: ordered variable typings plus named hypotheses.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub vars: Vec<(Name, TypeTerm)>,
    pub hyps: Vec<(Name, Formula)>,
}

impl Context {
    pub fn new() -> Context {
        Context::default()
    }

    pub fn lookup(&self, x: &str) -> Option<&TypeTerm> {
        self.vars
            .iter()
            .rev()
            .find(|(n, _)| n == x)
            .map(|(_, t)| t)
    }

    pub fn hyp(&self, h: &str) -> Option<&Formula> {
        self.hyps
            .iter()
            .rev()
            .find(|(n, _)| n == h)
            .map(|(_, f)| f)
    }

    pub fn push_var(&mut self, x: &str, t: TypeTerm) {
        self.vars.push((x.to_string(), t));
    }

    pub fn push_hyp(&mut self, h: &str, f: Formula) {
        self.hyps.push((h.to_string(), f));
    }

    pub fn with_var(&self, x: &str, t: TypeTerm) -> Context {
        let mut c = self.clone();
        c.push_var(x, t);
        c
    }

    pub fn with_hyp(&self, h: &str, f: Formula) -> Context {
        let mut c = self.clone();
        c.push_hyp(h, f);
        c
    }
}

/// The three judgment forms handled by the checker.
#[derive(Debug, Clone)]
pub enum Judgment {
    Pl {
        ctx: Context,
        goal: Formula,
    },
    Upl {
        ctx: Context,
        subject: Expr,
        ty: TypeTerm,
        post: Formula,
    },
    Rpl {
        ctx: Context,
        left: Expr,
        left_ty: TypeTerm,
        right: Expr,
        right_ty: TypeTerm,
        post: Formula,
    },
}

/// Distinguished variable names used by the unary and relational logics.
pub const R: &str = "r";
pub const R1: &str = "r1";
pub const R2: &str = "r2";
pub const RV: &str = "r'";
pub const RV1: &str = "r1'";
pub const RV2: &str = "r2'";
