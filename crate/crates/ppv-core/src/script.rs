//! Proof scripts: the step language shared by the assertion-logic checker and
//! the unary/relational layers, plus the `.ppv` item grammar (programs,
//! lemmas, assumptions, lifting declarations, claims).

use crate::ast::{Context, Expr, Formula, Judgment};
use crate::error::{CoreError, Result};
use crate::lexer::Tok;
use crate::parser::Parser;
use crate::types::TypeTerm;

/// Reference to a hypothesis, possibly through conjunction projections and
/// modus ponens (a tiny forward proof-term language).
#[derive(Debug, Clone)]
pub enum HypRef {
    Name(String),
    Left(Box<HypRef>),
    Right(Box<HypRef>),
    Mp(Box<HypRef>, Box<HypRef>),
    Pair(Box<HypRef>, Box<HypRef>),
}

#[derive(Debug, Clone)]
pub enum EqDir {
    Ltr,
    Rtl,
}

#[derive(Debug, Clone)]
pub struct RewriteSpec {
    pub eq_hyp: String,
    pub dir: EqDir,
    pub occs: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub enum Rule {
    Ax(HypRef),
    TopIntro,
    Oracle,
    Conv,
    ConvFrom(HypRef),
    Mp(HypRef, HypRef),
    AndIntro(HypRef, HypRef),
    AndLeft(HypRef),
    AndRight(HypRef),
    ForallElim(HypRef, Vec<Expr>),
    ExistsIntro(Expr, HypRef),
    Absurd(HypRef, HypRef),
    BotElim(HypRef),
    Field { using: Vec<String> },
    Schema {
        name: String,
        terms: Vec<(String, Expr)>,
        types: Vec<(String, TypeTerm)>,
        using: Vec<String>,
    },
    Rewrite { src: HypRef, spec: RewriteSpec },
    ECong(HypRef),
    Funext(HypRef),
    Lemma { name: String, args: Vec<Expr> },
    Assume(String),
}

#[derive(Debug, Clone)]
pub enum Justification {
    By(Rule),
    Block(Vec<Step>),
}

#[derive(Debug, Clone)]
pub struct LetrecDef {
    /// Placeholder variable the postcondition uses for this recursion.
    pub slot: String,
    pub term: Expr,
}

#[derive(Debug, Clone)]
pub struct LetrecInd {
    pub x: String,
    pub ih: String,
    pub pre: Formula,
    pub post: Formula,
    pub defs: Vec<LetrecDef>,
    pub body: Vec<Step>,
}

#[derive(Debug, Clone)]
pub enum Step {
    Intro(String),
    Fix(String),
    NotIntro(String),
    ConvGoal,
    RewriteGoal(RewriteSpec),
    Split(Vec<Step>, Vec<Step>),
    CasesBool {
        scrut: Expr,
        name: String,
        tt: Vec<Step>,
        ff: Vec<Step>,
    },
    CasesCmp {
        lhs: Expr,
        rhs: Expr,
        name: String,
        lt: Vec<Step>,
        eq: Vec<Step>,
        gt: Vec<Step>,
    },
    CasesList {
        scrut: Expr,
        head: String,
        tail: String,
        name: String,
        nil: Vec<Step>,
        cons: Vec<Step>,
    },
    ExistsElim {
        hyp: String,
        var: String,
        name: String,
        body: Vec<Step>,
    },
    LetrecInd(LetrecInd),
    Have {
        name: String,
        formula: Formula,
        just: Justification,
    },
    Thus(Justification),
    Exact(String),

    // ---- unary-logic steps ----
    UVar(Vec<Step>),
    UAbs {
        pre: Formula,
        hyp: Option<String>,
        body: Vec<Step>,
    },
    UApp {
        pre: Formula,
        post: Formula,
        x: String,
        fun: Vec<Step>,
        arg: Vec<Step>,
    },
    USub {
        mid: Formula,
        subj: Vec<Step>,
        entail: Vec<Step>,
    },
    URet(Vec<Step>),
    UBind {
        first: Formula,
        lhs: Vec<Step>,
        rhs: Vec<Step>,
    },
    UQry {
        first: Formula,
        lhs: Vec<Step>,
        rhs: Vec<Step>,
    },
    ULetrec {
        pre: Formula,
        post: Formula,
        ih: String,
        body: Vec<Step>,
    },
    UCaseBool {
        name: String,
        tt: Vec<Step>,
        ff: Vec<Step>,
    },
    UCaseList {
        name: String,
        nil: Vec<Step>,
        cons: Vec<Step>,
    },
    UPl(Vec<Step>),
    ULet {
        first: Formula,
        rhs: Vec<Step>,
        body: Vec<Step>,
    },
    Bayes {
        query: Expr,
        pos: Vec<Step>,
        finite: Vec<Step>,
    },
    ULiftUnit {
        param: String,
        phi: Formula,
        body: Vec<Step>,
    },
    ULiftBind {
        param: String,
        alpha: Expr,
        beta: Expr,
        phi: Formula,
        post: Formula,
        lhs: Vec<Step>,
        rhs: Vec<Step>,
    },

    // ---- relational-logic steps ----
    RPl(Vec<Step>),
    RSub {
        mid: Formula,
        subj: Vec<Step>,
        entail: Vec<Step>,
    },
    RAbs {
        pre: Formula,
        body: Vec<Step>,
    },
    RRet(Vec<Step>),
    RBind {
        first: Formula,
        lhs: Vec<Step>,
        rhs: Vec<Step>,
    },
    RQry {
        first: Formula,
        lhs: Vec<Step>,
        rhs: Vec<Step>,
    },
    RRetOne {
        side: Side,
        body: Vec<Step>,
    },
    RBindOne {
        side: Side,
        first: Formula,
        fst: Vec<Step>,
        snd: Vec<Step>,
    },
    RQryOne {
        side: Side,
        first: Formula,
        fst: Vec<Step>,
        snd: Vec<Step>,
    },
    RLet {
        side: Side,
        first: Formula,
        rhs: Vec<Step>,
        body: Vec<Step>,
    },
    RLetrec {
        pre: Formula,
        post: Formula,
        ih: String,
        body: Vec<Step>,
    },
    RCaseList {
        name: String,
        nil: Vec<Step>,
        cons: Vec<Step>,
    },
    RLiftUnit {
        param: String,
        phi: Formula,
        body: Vec<Step>,
    },
    RLiftBind {
        param: String,
        alpha: Expr,
        beta: Expr,
        phi: Formula,
        post: Formula,
        lhs: Vec<Step>,
        rhs: Vec<Step>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// One item of a `.ppv` file.
#[derive(Debug, Clone)]
pub enum Item {
    Program {
        name: String,
        ctx: Context,
        body: Expr,
    },
    Assumption {
        name: String,
        ctx: Context,
        formula: Formula,
    },
    Lifting {
        name: String,
        relational: bool,
        monoid: String,
        obs: Vec<TypeTerm>,
        test: Formula,
    },
    Proof(ProofItem),
}

#[derive(Debug, Clone)]
pub struct ProofItem {
    pub name: String,
    pub ctx: Context,
    pub goal: GoalSpec,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone)]
pub enum GoalSpec {
    Pl(Formula),
    Upl {
        subject: Expr,
        ty: TypeTerm,
        post: Formula,
    },
    Rpl {
        left: Expr,
        left_ty: TypeTerm,
        right: Expr,
        right_ty: TypeTerm,
        post: Formula,
    },
}

impl GoalSpec {
    pub fn to_judgment(&self, ctx: &Context) -> Judgment {
        match self {
            GoalSpec::Pl(f) => Judgment::Pl {
                ctx: ctx.clone(),
                goal: f.clone(),
            },
            GoalSpec::Upl { subject, ty, post } => Judgment::Upl {
                ctx: ctx.clone(),
                subject: subject.clone(),
                ty: ty.clone(),
                post: post.clone(),
            },
            GoalSpec::Rpl {
                left,
                left_ty,
                right,
                right_ty,
                post,
            } => Judgment::Rpl {
                ctx: ctx.clone(),
                left: left.clone(),
                left_ty: left_ty.clone(),
                right: right.clone(),
                right_ty: right_ty.clone(),
                post: post.clone(),
            },
        }
    }
}

pub fn parse_file(src: &str) -> Result<Vec<Item>> {
    let mut p = Parser::new(src)?;
    let mut items = Vec::new();
    loop {
        if p.eat(&Tok::Eof) || matches!(p.peek(), Tok::Eof) {
            break;
        }
        items.push(parse_item(&mut p)?);
    }
    Ok(items)
}

fn parse_item(p: &mut Parser) -> Result<Item> {
    if p.eat_kw("program") {
        let name = p.ident()?;
        let ctx = if matches!(p.peek(), Tok::LBracket) {
            parse_ctx(p)?
        } else {
            Context::new()
        };
        p.expect(&Tok::Eq, "'='")?;
        let body = p.expr()?;
        return Ok(Item::Program { name, ctx, body });
    }
    if p.eat_kw("assumption") {
        let name = p.ident()?;
        p.expect(&Tok::Colon, "':'")?;
        let ctx = if p.eat_kw("context") {
            parse_ctx(p)?
        } else {
            Context::new()
        };
        let formula = p.formula()?;
        return Ok(Item::Assumption { name, ctx, formula });
    }
    if p.eat_kw("lifting") {
        let name = p.ident()?;
        p.expect(&Tok::Colon, "':'")?;
        let relational = if p.eat_kw("relational") {
            true
        } else {
            p.expect_kw("unary")?;
            false
        };
        p.expect_kw("monoid")?;
        let monoid = p.ident()?;
        p.expect_kw("obs")?;
        let mut obs = vec![p.ty()?];
        if p.eat(&Tok::Comma) {
            obs.push(p.ty()?);
        }
        p.expect_kw("test")?;
        let test = p.formula()?;
        return Ok(Item::Lifting {
            name,
            relational,
            monoid,
            obs,
            test,
        });
    }
    if p.eat_kw("lemma") || p.eat_kw("example") {
        let name = p.ident()?;
        p.expect(&Tok::Colon, "':'")?;
        let mut ctx = if p.eat_kw("context") {
            parse_ctx(p)?
        } else {
            Context::new()
        };
        if p.eat_kw("assume") {
            parse_hyps(p, &mut ctx)?;
        }
        p.expect_kw("goal")?;
        let goal = if p.eat_kw("pl") {
            p.expect(&Tok::Colon, "':'")?;
            GoalSpec::Pl(p.formula()?)
        } else if p.eat_kw("upl") {
            p.expect(&Tok::Colon, "':'")?;
            let subject = p.expr()?;
            p.expect(&Tok::Colon, "':' before subject type")?;
            let ty = p.ty()?;
            p.expect(&Tok::Bar, "'|'")?;
            let post = p.formula()?;
            GoalSpec::Upl { subject, ty, post }
        } else if p.eat_kw("rpl") {
            p.expect(&Tok::Colon, "':'")?;
            let left = p.expr()?;
            p.expect(&Tok::Colon, "':'")?;
            let left_ty = p.ty()?;
            p.expect(&Tok::Tilde, "'~'")?;
            let right = p.expr()?;
            p.expect(&Tok::Colon, "':'")?;
            let right_ty = p.ty()?;
            p.expect(&Tok::Bar, "'|'")?;
            let post = p.formula()?;
            GoalSpec::Rpl {
                left,
                left_ty,
                right,
                right_ty,
                post,
            }
        } else {
            return Err(CoreError::parse(p.here(), "expected goal kind pl/upl/rpl"));
        };
        p.expect_kw("proof")?;
        let steps = parse_steps_until_qed(p)?;
        return Ok(Item::Proof(ProofItem {
            name,
            ctx,
            goal,
            steps,
        }));
    }
    Err(CoreError::parse(
        p.here(),
        format!("expected an item, found {:?}", p.peek()),
    ))
}

fn parse_ctx(p: &mut Parser) -> Result<Context> {
    p.expect(&Tok::LBracket, "'['")?;
    let mut ctx = Context::new();
    if !p.eat(&Tok::RBracket) {
        loop {
            let x = p.ident()?;
            p.expect(&Tok::Colon, "':'")?;
            let t = p.ty()?;
            ctx.push_var(&x, t);
            if p.eat(&Tok::RBracket) {
                break;
            }
            p.expect(&Tok::Comma, "','")?;
        }
    }
    Ok(ctx)
}

fn parse_hyps(p: &mut Parser, ctx: &mut Context) -> Result<()> {
    p.expect(&Tok::LBracket, "'['")?;
    if p.eat(&Tok::RBracket) {
        return Ok(());
    }
    loop {
        let h = p.ident()?;
        p.expect(&Tok::Colon, "':'")?;
        let f = p.formula()?;
        ctx.push_hyp(&h, f);
        if p.eat(&Tok::RBracket) {
            break;
        }
        p.expect(&Tok::Comma, "','")?;
    }
    Ok(())
}

fn parse_steps_until_qed(p: &mut Parser) -> Result<Vec<Step>> {
    let mut steps = Vec::new();
    loop {
        if p.eat_kw("qed") {
            return Ok(steps);
        }
        steps.push(parse_step(p)?);
    }
}

pub fn parse_block(p: &mut Parser) -> Result<Vec<Step>> {
    p.expect(&Tok::LBrace, "'{'")?;
    let mut steps = Vec::new();
    loop {
        if p.eat(&Tok::RBrace) {
            return Ok(steps);
        }
        steps.push(parse_step(p)?);
    }
}

fn parse_formula_arg(p: &mut Parser, key: &str) -> Result<Formula> {
    p.expect_kw(key)?;
    p.expect(&Tok::Assign, "':='")?;
    let f = p.formula()?;
    Ok(f)
}

fn parse_step(p: &mut Parser) -> Result<Step> {
    let pos = p.here();
    let kw = p.ident()?;
    match kw.as_str() {
        "intro" => Ok(Step::Intro(p.ident()?)),
        "fix" => Ok(Step::Fix(p.ident()?)),
        "not_intro" => Ok(Step::NotIntro(p.ident()?)),
        "conv_goal" => Ok(Step::ConvGoal),
        "rewrite_goal" => {
            p.expect(&Tok::LParen, "'('")?;
            let spec = parse_rewrite_spec(p)?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::RewriteGoal(spec))
        }
        "split" => Ok(Step::Split(parse_block(p)?, parse_block(p)?)),
        "cases_bool" => {
            p.expect(&Tok::LParen, "'('")?;
            let scrut = p.expr()?;
            p.expect(&Tok::RParen, "')'")?;
            p.expect_kw("as")?;
            let name = p.ident()?;
            Ok(Step::CasesBool {
                scrut,
                name,
                tt: parse_block(p)?,
                ff: parse_block(p)?,
            })
        }
        "cases_cmp" => {
            p.expect(&Tok::LParen, "'('")?;
            let lhs = p.expr()?;
            p.expect(&Tok::Comma, "','")?;
            let rhs = p.expr()?;
            p.expect(&Tok::RParen, "')'")?;
            p.expect_kw("as")?;
            let name = p.ident()?;
            Ok(Step::CasesCmp {
                lhs,
                rhs,
                name,
                lt: parse_block(p)?,
                eq: parse_block(p)?,
                gt: parse_block(p)?,
            })
        }
        "cases_list" => {
            p.expect(&Tok::LParen, "'('")?;
            let scrut = p.expr()?;
            p.expect(&Tok::RParen, "')'")?;
            p.expect_kw("as")?;
            let head = p.ident()?;
            let tail = p.ident()?;
            let name = p.ident()?;
            Ok(Step::CasesList {
                scrut,
                head,
                tail,
                name,
                nil: parse_block(p)?,
                cons: parse_block(p)?,
            })
        }
        "exists_elim" => {
            p.expect(&Tok::LParen, "'('")?;
            let hyp = p.ident()?;
            p.expect(&Tok::RParen, "')'")?;
            p.expect_kw("as")?;
            let var = p.ident()?;
            let name = p.ident()?;
            Ok(Step::ExistsElim {
                hyp,
                var,
                name,
                body: parse_block(p)?,
            })
        }
        "letrec_ind" => {
            p.expect(&Tok::LParen, "'('")?;
            p.expect_kw("x")?;
            p.expect(&Tok::Assign, "':='")?;
            let x = p.ident()?;
            p.expect(&Tok::Semi, "';'")?;
            p.expect_kw("ih")?;
            p.expect(&Tok::Assign, "':='")?;
            let ih = p.ident()?;
            p.expect(&Tok::Semi, "';'")?;
            let pre = parse_formula_arg(p, "pre")?;
            p.expect(&Tok::Semi, "';'")?;
            let post = parse_formula_arg(p, "post")?;
            let mut defs = Vec::new();
            while p.eat(&Tok::Semi) {
                p.expect_kw("def")?;
                let slot = p.ident()?;
                p.expect(&Tok::Assign, "':='")?;
                let term = p.expr()?;
                defs.push(LetrecDef { slot, term });
            }
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::LetrecInd(LetrecInd {
                x,
                ih,
                pre,
                post,
                defs,
                body: parse_block(p)?,
            }))
        }
        "have" => {
            let name = p.ident()?;
            p.expect(&Tok::Colon, "':'")?;
            let formula = p.formula()?;
            let just = parse_justification(p)?;
            Ok(Step::Have {
                name,
                formula,
                just,
            })
        }
        "thus" => Ok(Step::Thus(parse_justification(p)?)),
        "exact" => Ok(Step::Exact(p.ident()?)),

        // unary steps
        "u_var" => Ok(Step::UVar(parse_block(p)?)),
        "u_abs" => {
            p.expect(&Tok::LParen, "'('")?;
            let pre = parse_formula_arg(p, "pre")?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::UAbs {
                pre,
                hyp: None,
                body: parse_block(p)?,
            })
        }
        "u_app" => {
            p.expect(&Tok::LParen, "'('")?;
            let pre = parse_formula_arg(p, "pre")?;
            p.expect(&Tok::Semi, "';'")?;
            let post = parse_formula_arg(p, "post")?;
            p.expect(&Tok::Semi, "';'")?;
            p.expect_kw("x")?;
            p.expect(&Tok::Assign, "':='")?;
            let x = p.ident()?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::UApp {
                pre,
                post,
                x,
                fun: parse_block(p)?,
                arg: parse_block(p)?,
            })
        }
        "u_sub" => {
            p.expect(&Tok::LParen, "'('")?;
            let mid = parse_formula_arg(p, "mid")?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::USub {
                mid,
                subj: parse_block(p)?,
                entail: parse_block(p)?,
            })
        }
        "u_ret" => Ok(Step::URet(parse_block(p)?)),
        "u_bind" | "u_qry" => {
            p.expect(&Tok::LParen, "'('")?;
            let first = parse_formula_arg(p, "first")?;
            p.expect(&Tok::RParen, "')'")?;
            let lhs = parse_block(p)?;
            let rhs = parse_block(p)?;
            Ok(if kw == "u_bind" {
                Step::UBind { first, lhs, rhs }
            } else {
                Step::UQry { first, lhs, rhs }
            })
        }
        "u_letrec" => {
            p.expect(&Tok::LParen, "'('")?;
            let pre = parse_formula_arg(p, "pre")?;
            p.expect(&Tok::Semi, "';'")?;
            let post = parse_formula_arg(p, "post")?;
            p.expect(&Tok::Semi, "';'")?;
            p.expect_kw("ih")?;
            p.expect(&Tok::Assign, "':='")?;
            let ih = p.ident()?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::ULetrec {
                pre,
                post,
                ih,
                body: parse_block(p)?,
            })
        }
        "u_case_bool" => {
            p.expect_kw("as")?;
            let name = p.ident()?;
            Ok(Step::UCaseBool {
                name,
                tt: parse_block(p)?,
                ff: parse_block(p)?,
            })
        }
        "u_case_list" => {
            p.expect_kw("as")?;
            let name = p.ident()?;
            Ok(Step::UCaseList {
                name,
                nil: parse_block(p)?,
                cons: parse_block(p)?,
            })
        }
        "u_pl" => Ok(Step::UPl(parse_block(p)?)),
        "u_let" => {
            p.expect(&Tok::LParen, "'('")?;
            let first = parse_formula_arg(p, "first")?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::ULet {
                first,
                rhs: parse_block(p)?,
                body: parse_block(p)?,
            })
        }
        "bayes" => {
            p.expect(&Tok::LParen, "'('")?;
            p.expect_kw("query")?;
            p.expect(&Tok::Assign, "':='")?;
            let query = p.expr()?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::Bayes {
                query,
                pos: parse_block(p)?,
                finite: parse_block(p)?,
            })
        }
        "u_lift_unit" | "r_lift_unit" => {
            p.expect(&Tok::LParen, "'('")?;
            let param = p.ident()?;
            p.expect(&Tok::Semi, "';'")?;
            let phi = parse_formula_arg(p, "phi")?;
            p.expect(&Tok::RParen, "')'")?;
            let body = parse_block(p)?;
            Ok(if kw == "u_lift_unit" {
                Step::ULiftUnit { param, phi, body }
            } else {
                Step::RLiftUnit { param, phi, body }
            })
        }
        "u_lift_bind" | "r_lift_bind" => {
            p.expect(&Tok::LParen, "'('")?;
            let param = p.ident()?;
            p.expect(&Tok::Semi, "';'")?;
            p.expect_kw("alpha")?;
            p.expect(&Tok::Assign, "':='")?;
            let alpha = p.expr()?;
            p.expect(&Tok::Semi, "';'")?;
            p.expect_kw("beta")?;
            p.expect(&Tok::Assign, "':='")?;
            let beta = p.expr()?;
            p.expect(&Tok::Semi, "';'")?;
            let phi = parse_formula_arg(p, "phi")?;
            p.expect(&Tok::Semi, "';'")?;
            let post = parse_formula_arg(p, "post")?;
            p.expect(&Tok::RParen, "')'")?;
            let lhs = parse_block(p)?;
            let rhs = parse_block(p)?;
            Ok(if kw == "u_lift_bind" {
                Step::ULiftBind {
                    param,
                    alpha,
                    beta,
                    phi,
                    post,
                    lhs,
                    rhs,
                }
            } else {
                Step::RLiftBind {
                    param,
                    alpha,
                    beta,
                    phi,
                    post,
                    lhs,
                    rhs,
                }
            })
        }

        // relational steps
        "r_pl" => Ok(Step::RPl(parse_block(p)?)),
        "r_sub" => {
            p.expect(&Tok::LParen, "'('")?;
            let mid = parse_formula_arg(p, "mid")?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::RSub {
                mid,
                subj: parse_block(p)?,
                entail: parse_block(p)?,
            })
        }
        "r_abs" => {
            p.expect(&Tok::LParen, "'('")?;
            let pre = parse_formula_arg(p, "pre")?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::RAbs {
                pre,
                body: parse_block(p)?,
            })
        }
        "r_ret" => Ok(Step::RRet(parse_block(p)?)),
        "r_bind" | "r_qry" => {
            p.expect(&Tok::LParen, "'('")?;
            let first = parse_formula_arg(p, "first")?;
            p.expect(&Tok::RParen, "')'")?;
            let lhs = parse_block(p)?;
            let rhs = parse_block(p)?;
            Ok(if kw == "r_bind" {
                Step::RBind { first, lhs, rhs }
            } else {
                Step::RQry { first, lhs, rhs }
            })
        }
        "r_ret_l" | "r_ret_r" => Ok(Step::RRetOne {
            side: side_of(&kw),
            body: parse_block(p)?,
        }),
        "r_bind_l" | "r_bind_r" | "r_qry_l" | "r_qry_r" => {
            p.expect(&Tok::LParen, "'('")?;
            let first = parse_formula_arg(p, "first")?;
            p.expect(&Tok::RParen, "')'")?;
            let fst = parse_block(p)?;
            let snd = parse_block(p)?;
            Ok(if kw.starts_with("r_bind") {
                Step::RBindOne {
                    side: side_of(&kw),
                    first,
                    fst,
                    snd,
                }
            } else {
                Step::RQryOne {
                    side: side_of(&kw),
                    first,
                    fst,
                    snd,
                }
            })
        }
        "let_l" | "let_r" => {
            p.expect(&Tok::LParen, "'('")?;
            let first = parse_formula_arg(p, "first")?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::RLet {
                side: side_of(&kw),
                first,
                rhs: parse_block(p)?,
                body: parse_block(p)?,
            })
        }
        "r_letrec" => {
            p.expect(&Tok::LParen, "'('")?;
            let pre = parse_formula_arg(p, "pre")?;
            p.expect(&Tok::Semi, "';'")?;
            let post = parse_formula_arg(p, "post")?;
            p.expect(&Tok::Semi, "';'")?;
            p.expect_kw("ih")?;
            p.expect(&Tok::Assign, "':='")?;
            let ih = p.ident()?;
            p.expect(&Tok::RParen, "')'")?;
            Ok(Step::RLetrec {
                pre,
                post,
                ih,
                body: parse_block(p)?,
            })
        }
        "r_case_list" => {
            p.expect_kw("as")?;
            let name = p.ident()?;
            Ok(Step::RCaseList {
                name,
                nil: parse_block(p)?,
                cons: parse_block(p)?,
            })
        }
        other => Err(CoreError::parse(pos, format!("unknown step '{other}'"))),
    }
}

fn side_of(kw: &str) -> Side {
    if kw.ends_with("_l") {
        Side::Left
    } else {
        Side::Right
    }
}

fn parse_justification(p: &mut Parser) -> Result<Justification> {
    if p.eat_kw("by") {
        Ok(Justification::By(parse_rule(p)?))
    } else {
        Ok(Justification::Block(parse_block(p)?))
    }
}

fn parse_rewrite_spec(p: &mut Parser) -> Result<RewriteSpec> {
    let eq_hyp = p.ident()?;
    let mut dir = EqDir::Ltr;
    let mut occs = None;
    while p.eat(&Tok::Comma) {
        if p.eat_kw("rtl") {
            dir = EqDir::Rtl;
        } else if p.eat_kw("at") {
            let mut v = Vec::new();
            while let Tok::Number(n) = p.peek().clone() {
                p.next_tok();
                let k = n
                    .to_integer()
                    .try_into()
                    .map_err(|_| CoreError::parse(p.here(), "bad occurrence index"))?;
                v.push(k);
            }
            occs = Some(v);
        } else {
            return Err(CoreError::parse(p.here(), "expected 'rtl' or 'at'"));
        }
    }
    Ok(RewriteSpec { eq_hyp, dir, occs })
}

fn parse_name_list(p: &mut Parser) -> Result<Vec<String>> {
    let mut v = Vec::new();
    loop {
        v.push(p.ident()?);
        if !p.eat(&Tok::Comma) {
            return Ok(v);
        }
    }
}

fn parse_rule(p: &mut Parser) -> Result<Rule> {
    let pos = p.here();
    let kw = p.ident()?;
    let rule = match kw.as_str() {
        "ax" => Rule::Ax(paren1_href(p)?),
        "top_intro" => Rule::TopIntro,
        "oracle" => Rule::Oracle,
        "conv" => Rule::Conv,
        "conv_from" => Rule::ConvFrom(paren1_href(p)?),
        "mp" => {
            let (a, b) = paren2_href(p)?;
            Rule::Mp(a, b)
        }
        "and_intro" => {
            let (a, b) = paren2_href(p)?;
            Rule::AndIntro(a, b)
        }
        "and_left" => Rule::AndLeft(paren1_href(p)?),
        "and_right" => Rule::AndRight(paren1_href(p)?),
        "forall_elim" => {
            p.expect(&Tok::LParen, "'('")?;
            let h = parse_href(p)?;
            p.expect(&Tok::Semi, "';'")?;
            let mut args = vec![p.expr()?];
            while p.eat(&Tok::Comma) {
                args.push(p.expr()?);
            }
            p.expect(&Tok::RParen, "')'")?;
            Rule::ForallElim(h, args)
        }
        "exists_intro" => {
            p.expect(&Tok::LParen, "'('")?;
            let witness = p.expr()?;
            p.expect(&Tok::Semi, "';'")?;
            let h = parse_href(p)?;
            p.expect(&Tok::RParen, "')'")?;
            Rule::ExistsIntro(witness, h)
        }
        "absurd" => {
            let (a, b) = paren2_href(p)?;
            Rule::Absurd(a, b)
        }
        "bot_elim" => Rule::BotElim(paren1_href(p)?),
        "field" => {
            let mut using = Vec::new();
            if p.eat(&Tok::LParen) {
                if p.eat_kw("using") {
                    using = parse_name_list(p)?;
                }
                p.expect(&Tok::RParen, "')'")?;
            }
            Rule::Field { using }
        }
        "schema" => {
            p.expect(&Tok::LParen, "'('")?;
            let name = p.ident()?;
            let mut terms = Vec::new();
            let mut types = Vec::new();
            let mut using = Vec::new();
            while p.eat(&Tok::Semi) {
                if p.eat_kw("using") {
                    using = parse_name_list(p)?;
                    continue;
                }
                loop {
                    if p.eat_kw("type") {
                        let k = p.ident()?;
                        p.expect(&Tok::Assign, "':='")?;
                        types.push((k, p.ty()?));
                    } else {
                        let k = p.ident()?;
                        p.expect(&Tok::Assign, "':='")?;
                        terms.push((k, p.expr()?));
                    }
                    if !p.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            p.expect(&Tok::RParen, "')'")?;
            Rule::Schema {
                name,
                terms,
                types,
                using,
            }
        }
        "rewrite" => {
            p.expect(&Tok::LParen, "'('")?;
            let src = parse_href(p)?;
            p.expect(&Tok::Comma, "','")?;
            let spec = parse_rewrite_spec(p)?;
            p.expect(&Tok::RParen, "')'")?;
            Rule::Rewrite { src, spec }
        }
        "e_cong" => Rule::ECong(paren1_href(p)?),
        "funext" => Rule::Funext(paren1_href(p)?),
        "lemma" => {
            p.expect(&Tok::LParen, "'('")?;
            let name = p.ident()?;
            let mut args = Vec::new();
            if p.eat(&Tok::Semi) {
                args.push(p.expr()?);
                while p.eat(&Tok::Comma) {
                    args.push(p.expr()?);
                }
            }
            p.expect(&Tok::RParen, "')'")?;
            Rule::Lemma { name, args }
        }
        "assume" => {
            p.expect(&Tok::LParen, "'('")?;
            let a = p.ident()?;
            p.expect(&Tok::RParen, "')'")?;
            Rule::Assume(a)
        }
        other => {
            return Err(CoreError::parse(pos, format!("unknown rule '{other}'")));
        }
    };
    Ok(rule)
}

fn parse_href(p: &mut Parser) -> Result<HypRef> {
    if p.eat_kw("mp") {
        p.expect(&Tok::LParen, "'('")?;
        let a = parse_href(p)?;
        p.expect(&Tok::Comma, "','")?;
        let b = parse_href(p)?;
        p.expect(&Tok::RParen, "')'")?;
        return Ok(HypRef::Mp(Box::new(a), Box::new(b)));
    }
    if p.eat_kw("and_intro") {
        p.expect(&Tok::LParen, "'('")?;
        let a = parse_href(p)?;
        p.expect(&Tok::Comma, "','")?;
        let b = parse_href(p)?;
        p.expect(&Tok::RParen, "')'")?;
        return Ok(HypRef::Pair(Box::new(a), Box::new(b)));
    }
    if p.eat_kw("and_left") {
        p.expect(&Tok::LParen, "'('")?;
        let inner = parse_href(p)?;
        p.expect(&Tok::RParen, "')'")?;
        return Ok(HypRef::Left(Box::new(inner)));
    }
    if p.eat_kw("and_right") {
        p.expect(&Tok::LParen, "'('")?;
        let inner = parse_href(p)?;
        p.expect(&Tok::RParen, "')'")?;
        return Ok(HypRef::Right(Box::new(inner)));
    }
    Ok(HypRef::Name(p.ident()?))
}

fn paren1_href(p: &mut Parser) -> Result<HypRef> {
    p.expect(&Tok::LParen, "'('")?;
    let a = parse_href(p)?;
    p.expect(&Tok::RParen, "')'")?;
    Ok(a)
}

fn paren2_href(p: &mut Parser) -> Result<(HypRef, HypRef)> {
    p.expect(&Tok::LParen, "'('")?;
    let a = parse_href(p)?;
    p.expect(&Tok::Comma, "','")?;
    let b = parse_href(p)?;
    p.expect(&Tok::RParen, "')'")?;
    Ok((a, b))
}
