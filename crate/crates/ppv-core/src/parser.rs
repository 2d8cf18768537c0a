//! Recursive-descent parser for the surface syntax of types, expressions and
//! formulas. Proof scripts and corpus items build on these entry points.

use crate::ast::{CaseArms, Const, Expr, Formula, Prim};
use crate::error::{CoreError, Pos, Result};
use crate::lexer::{lex, Spanned, Tok};
use crate::types::TypeTerm;

pub struct Parser {
    toks: Vec<Spanned>,
    pub pos: usize,
}

pub fn parse_expr_str(src: &str) -> Result<Expr> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_formula_str(src: &str) -> Result<Formula> {
    let mut p = Parser::new(src)?;
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

pub fn parse_type_str(src: &str) -> Result<TypeTerm> {
    let mut p = Parser::new(src)?;
    let t = p.ty()?;
    p.expect_eof()?;
    Ok(t)
}

const EXPR_LOW_KEYWORDS: [&str; 7] = ["fun", "let", "mlet", "letrec", "if", "case", "observe"];

/// Fold only the rational-literal syntax `n/d` into a constant (so `3/4` and
/// `0.75` denote the same literal); other literal arithmetic stays symbolic
/// so that stated formulas match substitution instances.
fn fold_lit(op: Prim, lhs: Expr, rhs: Expr) -> Expr {
    use num_traits::Zero;
    if let (Expr::Const(Const::Rat(a)), Expr::Const(Const::Rat(b))) = (&lhs, &rhs) {
        if op == Prim::Div && !b.is_zero() {
            return Expr::Const(Const::Rat(a / b));
        }
    }
    Expr::prim(op, vec![lhs, rhs])
}

impl Parser {
    pub fn new(src: &str) -> Result<Parser> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }
    pub fn peek2(&self) -> &Tok {
        let i = (self.pos + 1).min(self.toks.len() - 1);
        &self.toks[i].tok
    }
    pub fn here(&self) -> Pos {
        self.toks[self.pos].pos
    }
    pub fn next_tok(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next_tok();
            true
        } else {
            false
        }
    }
    pub fn expect(&mut self, t: &Tok, what: &str) -> Result<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(CoreError::parse(
                self.here(),
                format!("expected {what}, found {:?}", self.peek()),
            ))
        }
    }
    pub fn expect_eof(&mut self) -> Result<()> {
        self.expect(&Tok::Eof, "end of input")
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if let Tok::Ident(s) = self.peek() {
            if s == kw {
                self.next_tok();
                return true;
            }
        }
        false
    }
    pub fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }
    pub fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(CoreError::parse(
                self.here(),
                format!("expected '{kw}', found {:?}", self.peek()),
            ))
        }
    }
    pub fn ident(&mut self) -> Result<String> {
        match self.next_tok() {
            Tok::Ident(s) => Ok(s),
            other => Err(CoreError::parse(
                self.here(),
                format!("expected identifier, found {other:?}"),
            )),
        }
    }

    // ------------------------------------------------------------------
    // Types
    // ------------------------------------------------------------------

    pub fn ty(&mut self) -> Result<TypeTerm> {
        let lhs = self.ty_prod()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.ty()?;
            Ok(TypeTerm::arrow(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn ty_prod(&mut self) -> Result<TypeTerm> {
        let lhs = self.ty_atom()?;
        if self.eat(&Tok::Star) {
            let rhs = self.ty_prod()?;
            Ok(TypeTerm::prod(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn ty_atom(&mut self) -> Result<TypeTerm> {
        let pos = self.here();
        match self.next_tok() {
            Tok::Ident(s) => match s.as_str() {
                "_" => Ok(TypeTerm::Hole),
                "unit" => Ok(TypeTerm::Unit),
                "bool" => Ok(TypeTerm::Bool),
                "int" => Ok(TypeTerm::Int),
                "real" => Ok(TypeTerm::Real),
                "preal" => Ok(TypeTerm::PReal),
                "M" => {
                    self.expect(&Tok::LBracket, "'['")?;
                    let t = self.ty()?;
                    self.expect(&Tok::RBracket, "']'")?;
                    Ok(TypeTerm::meas(t))
                }
                "D" => {
                    self.expect(&Tok::LBracket, "'['")?;
                    let t = self.ty()?;
                    self.expect(&Tok::RBracket, "']'")?;
                    Ok(TypeTerm::subprob(t))
                }
                "list" => {
                    self.expect(&Tok::LParen, "'('")?;
                    let t = self.ty()?;
                    self.expect(&Tok::RParen, "')'")?;
                    Ok(TypeTerm::list(t))
                }
                other => Err(CoreError::parse(pos, format!("unknown type '{other}'"))),
            },
            Tok::LParen => {
                let t = self.ty()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(t)
            }
            other => Err(CoreError::parse(pos, format!("expected type, found {other:?}"))),
        }
    }

    // ------------------------------------------------------------------
    // Expressions
    // ------------------------------------------------------------------

    pub fn expr(&mut self) -> Result<Expr> {
        if let Tok::Ident(s) = self.peek() {
            match s.as_str() {
                "fun" => return self.expr_fun(),
                "let" => return self.expr_let(false),
                "mlet" => return self.expr_let(true),
                "letrec" => return self.expr_letrec(),
                "if" => return self.expr_if(),
                "case" => return self.expr_case(),
                "observe" => return self.expr_observe(),
                _ => {}
            }
        }
        self.expr_or()
    }

    fn expr_fun(&mut self) -> Result<Expr> {
        self.expect_kw("fun")?;
        let x = self.ident()?;
        self.expect(&Tok::Colon, "':'")?;
        // The annotation stops before a top-level `->`, which belongs to the
        // lambda itself; arrow-typed binders take parentheses.
        let t = self.ty_prod()?;
        self.expect(&Tok::Arrow, "'->'")?;
        let b = self.expr()?;
        Ok(Expr::Lam(x, t, Box::new(b)))
    }

    fn expr_let(&mut self, monadic: bool) -> Result<Expr> {
        self.next_tok(); // let | mlet
        let x = self.ident()?;
        let ann = if self.eat(&Tok::Colon) {
            Some(self.ty()?)
        } else {
            None
        };
        self.expect(&Tok::Eq, "'='")?;
        let rhs = self.expr()?;
        self.expect_kw("in")?;
        let body = self.expr()?;
        Ok(if monadic {
            Expr::MacMlet {
                x,
                ann,
                rhs: Box::new(rhs),
                body: Box::new(body),
            }
        } else {
            Expr::MacLet {
                x,
                ann,
                rhs: Box::new(rhs),
                body: Box::new(body),
            }
        })
    }

    fn expr_letrec(&mut self) -> Result<Expr> {
        self.expect_kw("letrec")?;
        let f = self.ident()?;
        self.expect(&Tok::LParen, "'('")?;
        let x = self.ident()?;
        self.expect(&Tok::Colon, "':'")?;
        let dom = self.ty()?;
        self.expect(&Tok::RParen, "')'")?;
        self.expect(&Tok::Colon, "':' before result type")?;
        let cod = self.ty()?;
        self.expect(&Tok::Eq, "'='")?;
        let body = self.expr()?;
        Ok(Expr::Letrec {
            f,
            x,
            dom,
            cod,
            body: Box::new(body),
        })
    }

    fn expr_if(&mut self) -> Result<Expr> {
        self.expect_kw("if")?;
        let b = self.expr_or()?;
        self.expect_kw("then")?;
        let tt = self.expr()?;
        self.expect_kw("else")?;
        let ff = self.expr()?;
        Ok(Expr::if_then_else(b, tt, ff))
    }

    fn expr_case(&mut self) -> Result<Expr> {
        self.expect_kw("case")?;
        let scrut = self.expr_or()?;
        self.expect_kw("with")?;
        if self.eat(&Tok::LBracket) {
            self.expect(&Tok::RBracket, "']'")?;
            self.expect(&Tok::Arrow, "'->'")?;
            let nil = self.expr()?;
            self.expect(&Tok::Bar, "'|'")?;
            let head = self.ident()?;
            self.expect(&Tok::ColonColon, "'::'")?;
            let tail = self.ident()?;
            self.expect(&Tok::Arrow, "'->'")?;
            let cons = self.expr()?;
            Ok(Expr::Case(
                Box::new(scrut),
                CaseArms::List {
                    nil: Box::new(nil),
                    head,
                    tail,
                    cons: Box::new(cons),
                },
            ))
        } else if self.eat(&Tok::Lt) {
            let fst = self.ident()?;
            self.expect(&Tok::Comma, "','")?;
            let snd = self.ident()?;
            self.expect(&Tok::Gt, "'>'")?;
            self.expect(&Tok::Arrow, "'->'")?;
            let body = self.expr()?;
            Ok(Expr::Case(
                Box::new(scrut),
                CaseArms::Pair {
                    fst,
                    snd,
                    body: Box::new(body),
                },
            ))
        } else {
            Err(CoreError::parse(
                self.here(),
                "expected '[]' or '<' after 'with'",
            ))
        }
    }

    fn expr_observe(&mut self) -> Result<Expr> {
        self.expect_kw("observe")?;
        let prior = self.expr_tensor()?;
        self.expect_kw("as")?;
        let lik = self.expr()?;
        Ok(Expr::Observe(Box::new(prior), Box::new(lik)))
    }

    fn expr_or(&mut self) -> Result<Expr> {
        let mut lhs = self.expr_and()?;
        while self.eat(&Tok::BarBar) {
            let rhs = self.expr_and()?;
            lhs = Expr::prim(Prim::Or, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn expr_and(&mut self) -> Result<Expr> {
        let mut lhs = self.expr_cmp()?;
        while self.eat(&Tok::AmpAmp) {
            let rhs = self.expr_cmp()?;
            lhs = Expr::prim(Prim::And, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn expr_cmp(&mut self) -> Result<Expr> {
        let lhs = self.expr_cons()?;
        let op = match self.peek() {
            Tok::Lt => Some(Prim::Lt),
            Tok::Le => Some(Prim::Le),
            Tok::Gt => Some(Prim::Gt),
            Tok::Ge => Some(Prim::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.next_tok();
            let rhs = self.expr_cons()?;
            Ok(Expr::prim(op, vec![lhs, rhs]))
        } else {
            Ok(lhs)
        }
    }

    fn expr_cons(&mut self) -> Result<Expr> {
        let lhs = self.expr_tensor()?;
        if self.eat(&Tok::ColonColon) {
            let rhs = self.expr_cons()?;
            Ok(Expr::prim(Prim::Cons, vec![lhs, rhs]))
        } else {
            Ok(lhs)
        }
    }

    fn expr_tensor(&mut self) -> Result<Expr> {
        let mut lhs = self.expr_add()?;
        while self.eat(&Tok::Tensor) {
            let rhs = self.expr_add()?;
            lhs = Expr::MacTensor(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn expr_add(&mut self) -> Result<Expr> {
        let mut lhs = self.expr_mul()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.expr_mul()?;
                lhs = fold_lit(Prim::Add, lhs, rhs);
            } else if self.eat(&Tok::Minus) {
                let rhs = self.expr_mul()?;
                lhs = fold_lit(Prim::Sub, lhs, rhs);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn expr_mul(&mut self) -> Result<Expr> {
        let mut lhs = self.expr_unary()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.expr_unary()?;
                lhs = fold_lit(Prim::Mul, lhs, rhs);
            } else if self.eat(&Tok::Slash) {
                let rhs = self.expr_unary()?;
                lhs = fold_lit(Prim::Div, lhs, rhs);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn expr_unary(&mut self) -> Result<Expr> {
        if self.eat_kw("not") {
            let e = self.expr_app()?;
            return Ok(Expr::prim(Prim::Not, vec![e]));
        }
        if self.eat(&Tok::Minus) {
            let e = self.expr_unary()?;
            if let Expr::Const(Const::Rat(r)) = &e {
                return Ok(Expr::Const(Const::Rat(-r.clone())));
            }
            return Ok(Expr::prim(Prim::Neg, vec![e]));
        }
        self.expr_app()
    }

    fn expr_app(&mut self) -> Result<Expr> {
        // Keyword-led application forms.
        if self.eat_kw("return") {
            let a = self.expr_atom()?;
            return Ok(Expr::Ret(Box::new(a)));
        }
        if self.eat_kw("bind") {
            let a = self.expr_atom()?;
            let b = self.expr_atom()?;
            return Ok(Expr::Bind(Box::new(a), Box::new(b)));
        }
        if self.eat_kw("pi1") {
            let a = self.expr_atom()?;
            return Ok(Expr::Proj(1, Box::new(a)));
        }
        if self.eat_kw("pi2") {
            let a = self.expr_atom()?;
            return Ok(Expr::Proj(2, Box::new(a)));
        }
        let mut head = self.expr_atom()?;
        while self.starts_atom() {
            let arg = self.expr_atom()?;
            head = Expr::app(head, arg);
        }
        Ok(head)
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => {
                !EXPR_LOW_KEYWORDS.contains(&s.as_str())
                    && !matches!(
                        s.as_str(),
                        // expression-level stops
                        "in" | "then"
                            | "else"
                            | "with"
                            | "as"
                            | "not"
                            | "st"
                            | "sup"
                            | "top"
                            | "bot"
                            | "forall"
                            | "exists"
                            | "return"
                            | "bind"
                            | "pi1"
                            | "pi2"
                            // item and proof-script keywords
                            | "by"
                            | "qed"
                            | "proof"
                            | "program"
                            | "assumption"
                            | "lemma"
                            | "example"
                            | "lifting"
                            | "goal"
                            | "context"
                            | "assume"
                            | "monoid"
                            | "obs"
                            | "test"
                            | "have"
                            | "thus"
                            | "exact"
                            | "intro"
                            | "fix"
                            | "not_intro"
                            | "conv_goal"
                            | "rewrite_goal"
                            | "split"
                            | "cases_bool"
                            | "cases_cmp"
                            | "cases_list"
                            | "exists_elim"
                            | "letrec_ind"
                            | "bayes"
                            | "let_l"
                            | "let_r"
                    ) && !s.starts_with("u_")
                    && !s.starts_with("r_")
            }
            // `<` is absent here: `f <x, y>` would be ambiguous with a
            // comparison, so pair arguments take parentheses.
            Tok::Number(_) | Tok::LParen | Tok::LBracket => true,
            _ => false,
        }
    }

    fn call_args(&mut self, n: usize, what: &str) -> Result<Vec<Expr>> {
        self.expect(&Tok::LParen, &format!("'(' after {what}"))?;
        let mut args = Vec::new();
        for i in 0..n {
            if i > 0 {
                self.expect(&Tok::Comma, "','")?;
            }
            args.push(self.expr()?);
        }
        self.expect(&Tok::RParen, "')'")?;
        Ok(args)
    }

    /// `X[x ~ e](body)` macro heads.
    fn sampled_macro(&mut self) -> Result<(String, Expr, Expr)> {
        self.expect(&Tok::LBracket, "'['")?;
        let binder = self.ident()?;
        self.expect(&Tok::Tilde, "'~'")?;
        let src = self.expr()?;
        self.expect(&Tok::RBracket, "']'")?;
        self.expect(&Tok::LParen, "'('")?;
        let body = self.expr()?;
        self.expect(&Tok::RParen, "')'")?;
        Ok((binder, src, body))
    }

    fn expr_atom(&mut self) -> Result<Expr> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Number(n) => {
                self.next_tok();
                Ok(Expr::Const(Const::Rat(n)))
            }
            Tok::LBracket => {
                self.next_tok();
                self.expect(&Tok::RBracket, "']' (empty list)")?;
                Ok(Expr::Const(Const::Nil))
            }
            Tok::Lt => {
                // Pair literal. Components parse below the comparison level so
                // the closing '>' is unambiguous; comparisons take parens.
                self.next_tok();
                let a = self.cmp_rhs()?;
                self.expect(&Tok::Comma, "','")?;
                let b = self.cmp_rhs()?;
                self.expect(&Tok::Gt, "'>'")?;
                Ok(Expr::pair(a, b))
            }
            Tok::LParen => {
                self.next_tok();
                if self.eat(&Tok::RParen) {
                    return Ok(Expr::Const(Const::Unit));
                }
                let e = self.expr()?;
                if self.eat(&Tok::Colon) {
                    let t = self.ty()?;
                    self.expect(&Tok::RParen, "')'")?;
                    Ok(Expr::Ascribe(Box::new(e), t))
                } else {
                    self.expect(&Tok::RParen, "')'")?;
                    Ok(e)
                }
            }
            Tok::Ident(s) => {
                self.next_tok();
                match s.as_str() {
                    "true" => Ok(Expr::Const(Const::Bool(true))),
                    "false" => Ok(Expr::Const(Const::Bool(false))),
                    "inf" => Ok(Expr::Const(Const::Infinity)),
                    "PI" => Ok(Expr::Const(Const::Pi)),
                    "EULER" => Ok(Expr::Const(Const::Euler)),
                    "Lebesgue" => Ok(Expr::Lebesgue),
                    "Uniform" => {
                        let mut a = self.call_args(2, "Uniform")?;
                        let b = a.pop().unwrap();
                        Ok(Expr::Uniform(Box::new(a.pop().unwrap()), Box::new(b)))
                    }
                    "Bern" => {
                        let mut a = self.call_args(1, "Bern")?;
                        Ok(Expr::Bern(Box::new(a.pop().unwrap())))
                    }
                    "Gauss" => {
                        let mut a = self.call_args(2, "Gauss")?;
                        let b = a.pop().unwrap();
                        Ok(Expr::Gauss(Box::new(a.pop().unwrap()), Box::new(b)))
                    }
                    "GPDF" => {
                        let mut a = self.call_args(2, "GPDF")?;
                        let b = a.pop().unwrap();
                        Ok(Expr::Gpdf(Box::new(a.pop().unwrap()), Box::new(b)))
                    }
                    "scale" => {
                        let mut a = self.call_args(2, "scale")?;
                        let b = a.pop().unwrap();
                        Ok(Expr::Scale(Box::new(a.pop().unwrap()), Box::new(b)))
                    }
                    "normalize" => {
                        let mut a = self.call_args(1, "normalize")?;
                        Ok(Expr::Normalize(Box::new(a.pop().unwrap())))
                    }
                    "min" => Ok(Expr::Prim(Prim::Min, self.call_args(2, "min")?)),
                    "max" => Ok(Expr::Prim(Prim::Max, self.call_args(2, "max")?)),
                    "psub" => Ok(Expr::Prim(Prim::PSub, self.call_args(2, "psub")?)),
                    "kl" => Ok(Expr::Prim(Prim::Kl, self.call_args(2, "kl")?)),
                    "sqrt" => Ok(Expr::Prim(Prim::Sqrt, self.call_args(1, "sqrt")?)),
                    "exp" => Ok(Expr::Prim(Prim::Exp, self.call_args(1, "exp")?)),
                    "log" => Ok(Expr::Prim(Prim::Log, self.call_args(1, "log")?)),
                    "abs" => Ok(Expr::Prim(Prim::Abs, self.call_args(1, "abs")?)),
                    "neg" => Ok(Expr::Prim(Prim::Neg, self.call_args(1, "neg")?)),
                    "len" => Ok(Expr::Prim(Prim::Len, self.call_args(1, "len")?)),
                    "preal" => Ok(Expr::Prim(Prim::RealToPReal, self.call_args(1, "preal")?)),
                    "int2real" => Ok(Expr::Prim(Prim::IntToReal, self.call_args(1, "int2real")?)),
                    "E" => {
                        let (binder, src, body) = self.sampled_macro()?;
                        Ok(Expr::Expect {
                            binder,
                            src: Box::new(src),
                            body: Box::new(body),
                        })
                    }
                    "Er" => {
                        let (binder, src, body) = self.sampled_macro()?;
                        Ok(Expr::MacEr {
                            binder,
                            src: Box::new(src),
                            body: Box::new(body),
                        })
                    }
                    "Pr" => {
                        let (binder, src, event) = self.sampled_macro()?;
                        Ok(Expr::MacPr {
                            binder,
                            src: Box::new(src),
                            event: Box::new(event),
                        })
                    }
                    "Var" => {
                        let (binder, src, body) = self.sampled_macro()?;
                        Ok(Expr::MacVar {
                            binder,
                            src: Box::new(src),
                            body: Box::new(body),
                        })
                    }
                    _ => {
                        if EXPR_LOW_KEYWORDS.contains(&s.as_str()) {
                            Err(CoreError::parse(
                                pos,
                                format!("keyword '{s}' cannot appear in this position"),
                            ))
                        } else {
                            Ok(Expr::Var(s))
                        }
                    }
                }
            }
            other => Err(CoreError::parse(
                pos,
                format!("expected expression, found {other:?}"),
            )),
        }
    }

    // ------------------------------------------------------------------
    // Formulas
    // ------------------------------------------------------------------

    pub fn formula(&mut self) -> Result<Formula> {
        if self.eat_kw("forall") {
            let x = self.ident()?;
            self.expect(&Tok::Colon, "':'")?;
            let t = self.ty()?;
            self.expect(&Tok::Dot, "'.'")?;
            let b = self.formula()?;
            return Ok(Formula::Forall(x, t, Box::new(b)));
        }
        if self.eat_kw("exists") {
            let x = self.ident()?;
            self.expect(&Tok::Colon, "':'")?;
            let t = self.ty()?;
            self.expect(&Tok::Dot, "'.'")?;
            let b = self.formula()?;
            return Ok(Formula::Exists(x, t, Box::new(b)));
        }
        let lhs = self.formula_imp()?;
        if self.eat(&Tok::Iff) {
            let rhs = self.formula_imp()?;
            Ok(Formula::MacIff(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn formula_imp(&mut self) -> Result<Formula> {
        let lhs = self.formula_conj()?;
        if self.eat(&Tok::FatArrow) {
            let rhs = self.formula_imp_or_quant()?;
            Ok(Formula::Imp(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    /// The right-hand side of `=>` may open a quantifier.
    fn formula_imp_or_quant(&mut self) -> Result<Formula> {
        if self.peek_kw("forall") || self.peek_kw("exists") {
            self.formula()
        } else {
            self.formula_imp()
        }
    }

    fn formula_conj(&mut self) -> Result<Formula> {
        let mut lhs = self.formula_neg()?;
        while self.eat(&Tok::Wedge) {
            let rhs = self.formula_neg()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn formula_neg(&mut self) -> Result<Formula> {
        if self.eat(&Tok::Tilde) {
            let f = self.formula_neg()?;
            return Ok(Formula::Not(Box::new(f)));
        }
        self.formula_atom()
    }

    fn formula_atom(&mut self) -> Result<Formula> {
        if self.eat_kw("top") {
            return Ok(Formula::Top);
        }
        if self.eat_kw("bot") {
            return Ok(Formula::Bot);
        }
        if self.peek_kw("kl_def") {
            self.next_tok();
            let mut a = self.call_args(3, "kl_def")?;
            let density = a.pop().unwrap();
            let d2 = a.pop().unwrap();
            let d1 = a.pop().unwrap();
            return Ok(Formula::MacKlDef { d1, d2, density });
        }
        if self.peek_kw("U") && matches!(self.peek2(), Tok::LParen) {
            self.next_tok();
            self.expect(&Tok::LParen, "'('")?;
            let param = self.ident()?;
            self.expect(&Tok::Comma, "','")?;
            let grade = self.expr()?;
            self.expect(&Tok::Comma, "','")?;
            let val_ty = self.ty()?;
            self.expect(&Tok::Comma, "','")?;
            let body = self.formula()?;
            self.expect(&Tok::RParen, "')'")?;
            return Ok(Formula::MacULift {
                param,
                grade,
                val_ty,
                body: Box::new(body),
            });
        }
        if self.peek_kw("R") && matches!(self.peek2(), Tok::LParen) {
            self.next_tok();
            self.expect(&Tok::LParen, "'('")?;
            let param = self.ident()?;
            self.expect(&Tok::Comma, "','")?;
            let grade = self.expr()?;
            self.expect(&Tok::Comma, "','")?;
            let val_ty1 = self.ty()?;
            self.expect(&Tok::Comma, "','")?;
            let val_ty2 = self.ty()?;
            self.expect(&Tok::Comma, "','")?;
            let body = self.formula()?;
            self.expect(&Tok::RParen, "')'")?;
            return Ok(Formula::MacRLift {
                param,
                grade,
                val_ty1,
                val_ty2,
                body: Box::new(body),
            });
        }
        // Parenthesized formula. Backtracks to the expression path on failure
        // or when a comparison follows (then the parens were an expression,
        // as in `(a <= b) = true`).
        if matches!(self.peek(), Tok::LParen) {
            let save = self.pos;
            self.next_tok();
            if let Ok(f) = self.formula() {
                if self.eat(&Tok::RParen)
                    && !matches!(
                        self.peek(),
                        Tok::Eq | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
                    )
                {
                    return Ok(f);
                }
            }
            self.pos = save;
        }
        // Comparison atom. Keyword-led forms (observe/let/...) are
        // self-delimiting and may appear unparenthesized on the left.
        let lhs = self.cmp_rhs()?;
        let pos = self.here();
        match self.next_tok() {
            Tok::Eq => {
                if self.peek_kw("sup") {
                    self.next_tok();
                    let binder = self.ident()?;
                    self.expect(&Tok::Colon, "':'")?;
                    let ty = self.ty()?;
                    let cond = if self.eat_kw("st") {
                        let c = self.formula_imp()?;
                        c
                    } else {
                        Formula::Top
                    };
                    self.expect(&Tok::Dot, "'.'")?;
                    let body = self.expr_cons()?;
                    return Ok(Formula::MacSup {
                        target: lhs,
                        binder,
                        ty,
                        cond: Box::new(cond),
                        body,
                    });
                }
                if self.peek_kw("lipk") {
                    self.next_tok();
                    self.expect(&Tok::LBracket, "'['")?;
                    let arg_ty = self.ty()?;
                    self.expect(&Tok::RBracket, "']'")?;
                    let mut a = self.call_args(3, "lipk")?;
                    let func = a.pop().unwrap();
                    let cod_metric = a.pop().unwrap();
                    let dom_metric = a.pop().unwrap();
                    return Ok(Formula::MacLip {
                        target: lhs,
                        arg_ty,
                        dom_metric,
                        cod_metric,
                        func,
                    });
                }
                if self.peek_kw("wass") {
                    self.next_tok();
                    self.expect(&Tok::LBracket, "'['")?;
                    let arg_ty = self.ty()?;
                    self.expect(&Tok::RBracket, "']'")?;
                    let mut a = self.call_args(3, "wass")?;
                    let mu2 = a.pop().unwrap();
                    let mu1 = a.pop().unwrap();
                    let metric = a.pop().unwrap();
                    return Ok(Formula::MacWass {
                        target: lhs,
                        arg_ty,
                        metric,
                        mu1,
                        mu2,
                    });
                }
                let rhs = self.cmp_rhs()?;
                Ok(Formula::Eq(lhs, rhs))
            }
            Tok::Lt => {
                let rhs = self.cmp_rhs()?;
                Ok(Formula::Lt(lhs, rhs))
            }
            Tok::Le => {
                let rhs = self.cmp_rhs()?;
                Ok(Formula::MacLe(lhs, rhs))
            }
            Tok::Gt => {
                let rhs = self.cmp_rhs()?;
                Ok(Formula::Lt(rhs, lhs))
            }
            Tok::Ge => {
                let rhs = self.cmp_rhs()?;
                Ok(Formula::MacLe(rhs, lhs))
            }
            other => Err(CoreError::parse(
                pos,
                format!("expected comparison in formula, found {other:?}"),
            )),
        }
    }

    /// Comparison right-hand sides admit full expressions when they start with
    /// a self-delimiting keyword form.
    fn cmp_rhs(&mut self) -> Result<Expr> {
        if let Tok::Ident(s) = self.peek() {
            if EXPR_LOW_KEYWORDS.contains(&s.as_str()) {
                return self.expr();
            }
        }
        self.expr_cons()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::printer::{print_expr, print_formula};
    use crate::subst::{alpha_eq_expr, alpha_eq_formula};

    fn round_expr(src: &str) {
        let e = parse_expr_str(src).expect(src);
        let printed = print_expr(&e);
        let e2 = parse_expr_str(&printed).unwrap_or_else(|err| {
            panic!("reparse of {printed:?} failed: {err}");
        });
        assert!(
            alpha_eq_expr(&e, &e2),
            "round trip changed term: {src} -> {printed}"
        );
    }

    fn round_formula(src: &str) {
        let f = parse_formula_str(src).expect(src);
        let printed = print_formula(&f);
        let f2 = parse_formula_str(&printed).unwrap_or_else(|err| {
            panic!("reparse of {printed:?} failed: {err}");
        });
        assert!(
            alpha_eq_formula(&f, &f2),
            "round trip changed formula: {src} -> {printed}"
        );
    }

    #[test]
    fn parse_smallest_monadic_term() {
        let e = parse_expr_str("return 0").unwrap();
        assert!(alpha_eq_expr(&e, &Expr::ret(Expr::int(0))));
    }

    #[test]
    fn round_trips() {
        round_expr("return 0");
        round_expr("mlet x = d in return x");
        round_expr("e1 (*) e2");
        round_expr("fun x : real -> x + y * 2");
        round_expr("observe y as fun x : real * real -> if pi1 x < 0.5 || pi2 x > 0.5 then 1 else 0");
        round_expr("let u1 = Uniform(0, 1) in let u2 = Uniform(0, 1) in u1 (*) u2");
        round_expr("letrec f (i : int) : M[real] = if i <= 0 then return 0 else mlet m = f (i - 1) in mlet x = d in return (1 / int2real(i) * (h x + m * int2real(i - 1)))");
        round_expr("E[x ~ Bern(1/4)](if x then 1 else 0)");
        round_expr("case L with [] -> p | y :: ls -> observe (f ls) as GPDF(y, s * s)");
        round_expr("scale(Lebesgue, GPDF(x, v))");
        round_expr("psub(E[x ~ d](preal(abs(x))), 0)");
        round_expr("<x, y> :: []");
        round_expr("(d : M[real])");
        round_expr("normalize(scale(e, f))");
        round_formula("forall n : int. 0 < n => Pr[y ~ r n](abs (y - mu) >= eps) <= s / (int2real(n) * eps * eps)");
        round_formula("Pr[z ~ r](pi1 z > 0.5) = 1/3");
        round_formula("top /\\ ~bot => x = y");
        round_formula("E[x ~ d](1) = 1 /\\ mu = Er[x ~ d](h x)");
        round_formula("a = sup x : real st x < 1. x * 2");
        round_formula("k1 = lipk[real](dS, dR, f)");
        round_formula("w = wass[real](dS, mu1, mu2)");
        round_formula("U(S_ub, alpha, bool, ~(r' = true))");
        round_formula("R(S_cpl, (), real, real, r1' = r2')");
        round_formula("kl_def(d1, d2, f)");
        round_formula("exists N : int. len(L) > N => kl(p1, p2) < eps");
    }

    #[test]
    fn position_annotated_error() {
        let err = parse_expr_str("return )").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("parse error"), "{msg}");
        assert!(msg.contains("1:"), "{msg}");
    }
}
