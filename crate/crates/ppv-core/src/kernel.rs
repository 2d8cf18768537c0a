//! The trusted assertion-logic checker: sequent state, intuitionistic rules,
//! conversion, rewriting with proved equations, schema instantiation with
//! side-condition discharge, the ground oracle, field normalization, datatype
//! case rules, recursion induction, lemma reuse and logged assumptions.
//!
//! The checker validates scripts; it never searches.

use crate::ast::{Const, Context, Expr, Formula, Prim};
use crate::conv;
use crate::desugar::{desugar_expr, desugar_formula};
use crate::error::{CoreError, Result};
use crate::field::{field_eq, sort_of_type};
use crate::liftings::MacroEnv;
use crate::oracle;
use crate::rewrite::{normalize_formula, rewrite_formula};
use crate::schema;
use crate::script::{EqDir, HypRef, Justification, LetrecInd, RewriteSpec, Rule, Step};
use crate::subst::{alpha_eq_expr, alpha_eq_formula, subst_formula, subst_formula_many};
use crate::typecheck::{check_expr, check_formula_wf, infer_expr};
use crate::types::TypeTerm;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// A checked lemma available for reuse: its exported closed formula and the
/// assumptions its proof used.
#[derive(Debug, Clone)]
pub struct LemmaEntry {
    pub exported: Formula,
    pub assumptions: BTreeSet<String>,
}

#[derive(Debug, Clone, Default)]
pub struct LemmaStore {
    entries: BTreeMap<String, LemmaEntry>,
}

impl LemmaStore {
    pub fn new() -> LemmaStore {
        LemmaStore::default()
    }
    pub fn get(&self, name: &str) -> Option<&LemmaEntry> {
        self.entries.get(name)
    }
    pub fn insert(&mut self, name: &str, entry: LemmaEntry) {
        self.entries.insert(name.to_string(), entry);
    }
    /// Export a checked judgment as a reusable formula: the universal closure
    /// over its context with its hypotheses as antecedents.
    pub fn export(ctx: &Context, goal: &Formula) -> Formula {
        let mut f = goal.clone();
        for (_, h) in ctx.hyps.iter().rev() {
            f = Formula::imp(h.clone(), f);
        }
        for (x, t) in ctx.vars.iter().rev() {
            f = Formula::Forall(x.clone(), t.clone(), Box::new(f));
        }
        f
    }
}

#[derive(Debug, Clone, Default)]
pub struct AssumptionTable {
    entries: BTreeMap<String, Formula>,
}

impl AssumptionTable {
    pub fn new() -> AssumptionTable {
        AssumptionTable::default()
    }
    pub fn get(&self, name: &str) -> Option<&Formula> {
        self.entries.get(name)
    }
    pub fn register(&mut self, name: &str, closed: Formula) {
        self.entries.insert(name.to_string(), closed);
    }
    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }
}

/// The outcome of checking one proof script.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Certificate {
    pub goal: String,
    pub rule_count: u64,
    pub assumptions: Vec<String>,
    pub oracle_discharges: Vec<String>,
}

pub struct Kernel<'a> {
    pub lemmas: &'a LemmaStore,
    pub assumptions: &'a AssumptionTable,
    pub env: &'a MacroEnv,
    pub no_assumptions: bool,
    rule_count: u64,
    used: BTreeSet<String>,
    oracle_log: Vec<String>,
}

fn perr(step: &str, msg: impl Into<String>) -> CoreError {
    CoreError::proof(step, msg)
}

impl<'a> Kernel<'a> {
    pub fn new(
        lemmas: &'a LemmaStore,
        assumptions: &'a AssumptionTable,
        env: &'a MacroEnv,
    ) -> Kernel<'a> {
        Kernel {
            lemmas,
            assumptions,
            env,
            no_assumptions: false,
            rule_count: 0,
            used: BTreeSet::new(),
            oracle_log: Vec::new(),
        }
    }

    pub fn certificate(&self, goal: impl Into<String>) -> Certificate {
        Certificate {
            goal: goal.into(),
            rule_count: self.rule_count,
            assumptions: self.used.iter().cloned().collect(),
            oracle_discharges: self.oracle_log.clone(),
        }
    }

    pub fn used_assumptions(&self) -> &BTreeSet<String> {
        &self.used
    }

    fn tick(&mut self) {
        self.rule_count += 1;
    }

    /// Desugar and wf-check a script-stated formula in the current context.
    pub fn prep_formula(&self, ctx: &Context, f: &Formula) -> Result<Formula> {
        let d = desugar_formula(f, self.env)?;
        check_formula_wf(ctx, &d)
    }

    pub fn prep_expr(&self, ctx: &Context, e: &Expr, want: Option<&TypeTerm>) -> Result<Expr> {
        let d = desugar_expr(e, self.env)?;
        match want {
            Some(t) => check_expr(ctx, &d, t),
            None => infer_expr(ctx, &d).map(|(_, e2)| e2),
        }
    }

    // ------------------------------------------------------------------
    // The sequential proof state machine
    // ------------------------------------------------------------------

    pub fn check_pl(&mut self, ctx: &Context, goal: &Formula, steps: &[Step]) -> Result<()> {
        let mut ctx = ctx.clone();
        let mut goal = goal.clone();
        let mut iter = steps.iter();
        while let Some(step) = iter.next() {
            self.tick();
            match step {
                Step::Intro(name) => match goal {
                    Formula::Imp(a, b) => {
                        ctx.push_hyp(name, *a);
                        goal = *b;
                    }
                    _ => return Err(perr("intro", "goal is not an implication")),
                },
                Step::Fix(x) => match goal {
                    Formula::Forall(y, t, b) => {
                        if ctx.lookup(x).is_some() {
                            return Err(perr("fix", format!("'{x}' already bound")));
                        }
                        goal = subst_formula(&b, &y, &Expr::var(x));
                        ctx.push_var(x, t);
                    }
                    _ => return Err(perr("fix", "goal is not universally quantified")),
                },
                Step::NotIntro(name) => match goal {
                    Formula::Not(a) => {
                        ctx.push_hyp(name, *a);
                        goal = Formula::Bot;
                    }
                    _ => return Err(perr("not_intro", "goal is not a negation")),
                },
                Step::ConvGoal => {
                    goal = normalize_formula(&goal)?;
                }
                Step::RewriteGoal(spec) => {
                    goal = self.apply_rewrite(&ctx, &goal, spec)?;
                }
                Step::Split(l, r) => {
                    return match goal {
                        Formula::And(a, b) => {
                            self.check_pl(&ctx, &a, l)?;
                            self.check_pl(&ctx, &b, r)?;
                            ensure_done(iter.next(), "split")
                        }
                        _ => Err(perr("split", "goal is not a conjunction")),
                    };
                }
                Step::CasesBool {
                    scrut,
                    name,
                    tt,
                    ff,
                } => {
                    let e = self.prep_expr(&ctx, scrut, Some(&TypeTerm::Bool))?;
                    let case = |v: bool| {
                        Formula::eq(e.clone(), Expr::Const(Const::Bool(v)))
                    };
                    self.check_pl(&ctx.with_hyp(name, case(true)), &goal, tt)?;
                    self.check_pl(&ctx.with_hyp(name, case(false)), &goal, ff)?;
                    return ensure_done(iter.next(), "cases_bool");
                }
                Step::CasesCmp {
                    lhs,
                    rhs,
                    name,
                    lt,
                    eq,
                    gt,
                } => {
                    let a = self.prep_expr(&ctx, lhs, None)?;
                    let (ta, _) = infer_expr(&ctx, &a)?;
                    if !ta.is_numeric() {
                        return Err(perr("cases_cmp", "non-numeric comparison"));
                    }
                    let b = self.prep_expr(&ctx, rhs, Some(&ta))?;
                    self.check_pl(
                        &ctx.with_hyp(name, Formula::lt(a.clone(), b.clone())),
                        &goal,
                        lt,
                    )?;
                    self.check_pl(
                        &ctx.with_hyp(name, Formula::eq(a.clone(), b.clone())),
                        &goal,
                        eq,
                    )?;
                    self.check_pl(&ctx.with_hyp(name, Formula::lt(b, a)), &goal, gt)?;
                    return ensure_done(iter.next(), "cases_cmp");
                }
                Step::CasesList {
                    scrut,
                    head,
                    tail,
                    name,
                    nil,
                    cons,
                } => {
                    let e = self.prep_expr(&ctx, scrut, None)?;
                    let (te, _) = infer_expr(&ctx, &e)?;
                    let elem = match &te {
                        TypeTerm::List(a) => (**a).clone(),
                        _ => return Err(perr("cases_list", "scrutinee is not a list")),
                    };
                    let nil_hyp = Formula::eq(
                        e.clone(),
                        Expr::Ascribe(Box::new(Expr::Const(Const::Nil)), te.clone()),
                    );
                    self.check_pl(&ctx.with_hyp(name, nil_hyp), &goal, nil)?;
                    let mut cctx = ctx
                        .with_var(head, elem)
                        .with_var(tail, te.clone());
                    cctx.push_hyp(
                        name,
                        Formula::eq(
                            e,
                            Expr::prim(Prim::Cons, vec![Expr::var(head), Expr::var(tail)]),
                        ),
                    );
                    self.check_pl(&cctx, &goal, cons)?;
                    return ensure_done(iter.next(), "cases_list");
                }
                Step::ExistsElim {
                    hyp,
                    var,
                    name,
                    body,
                } => {
                    let h = hyp_of(&ctx, hyp)?;
                    let (y, t, b) = match h {
                        Formula::Exists(y, t, b) => (y.clone(), t.clone(), (**b).clone()),
                        _ => return Err(perr("exists_elim", "hypothesis is not existential")),
                    };
                    if ctx.lookup(var).is_some() {
                        return Err(perr("exists_elim", format!("'{var}' already bound")));
                    }
                    let inst = subst_formula(&b, &y, &Expr::var(var));
                    let mut ectx = ctx.with_var(var, t);
                    ectx.push_hyp(name, inst);
                    self.check_pl(&ectx, &goal, body)?;
                    return ensure_done(iter.next(), "exists_elim");
                }
                Step::LetrecInd(ind) => {
                    self.check_letrec_ind(&ctx, &goal, ind)?;
                    return ensure_done(iter.next(), "letrec_ind");
                }
                Step::Have {
                    name,
                    formula,
                    just,
                } => {
                    let f = self.prep_formula(&ctx, formula)?;
                    self.check_just(&ctx, &f, just)?;
                    ctx.push_hyp(name, f);
                }
                Step::Thus(just) => {
                    self.check_just(&ctx, &goal, just)?;
                    return ensure_done(iter.next(), "thus");
                }
                Step::Exact(h) => {
                    let f = hyp_of(&ctx, h)?;
                    if !alpha_eq_formula(f, &goal) {
                        return Err(perr(
                            "exact",
                            format!(
                                "hypothesis '{h}' is `{}`, goal is `{}`",
                                crate::printer::print_formula(f),
                                crate::printer::print_formula(&goal)
                            ),
                        ));
                    }
                    return ensure_done(iter.next(), "exact");
                }
                other => {
                    return Err(perr(
                        "pl",
                        format!("step {other:?} is not an assertion-logic step"),
                    ))
                }
            }
        }
        Err(perr(
            "qed",
            format!(
                "goal `{}` left open",
                crate::printer::print_formula(&goal)
            ),
        ))
    }

    fn check_just(&mut self, ctx: &Context, stated: &Formula, just: &Justification) -> Result<()> {
        match just {
            Justification::By(rule) => self.check_rule(ctx, stated, rule),
            Justification::Block(steps) => self.check_pl(ctx, stated, steps),
        }
    }

    fn apply_rewrite(&mut self, ctx: &Context, target: &Formula, spec: &RewriteSpec) -> Result<Formula> {
        let eqf = hyp_of(ctx, &spec.eq_hyp)?.clone();
        let (l, r) = match &eqf {
            Formula::Eq(l, r) => (l.clone(), r.clone()),
            _ => {
                return Err(perr(
                    "rewrite",
                    format!("'{}' is not an equation", spec.eq_hyp),
                ))
            }
        };
        let (l, r) = match spec.dir {
            EqDir::Ltr => (l, r),
            EqDir::Rtl => (r, l),
        };
        let out = rewrite_formula(target, &l, &r, spec.occs.as_deref())?;
        Ok(out.result)
    }

    // ------------------------------------------------------------------
    // Leaf rules
    // ------------------------------------------------------------------

    fn check_rule(&mut self, ctx: &Context, stated: &Formula, rule: &Rule) -> Result<()> {
        match rule {
            Rule::Ax(h) => {
                let f = resolve_hyp(ctx, h)?;
                expect_alpha(stated, &f, "ax")
            }
            Rule::TopIntro => match stated {
                Formula::Top => Ok(()),
                _ => Err(perr("top_intro", "stated formula is not top")),
            },
            Rule::Oracle => self.discharge_by_oracle(stated),
            Rule::Conv => match stated {
                Formula::Eq(a, b) => {
                    if conv::conv_eq(a, b)? {
                        Ok(())
                    } else {
                        Err(perr(
                            "conv",
                            format!(
                                "sides are not convertible:\n  {}\n  {}",
                                crate::printer::print_expr(&conv::normalize(a)?),
                                crate::printer::print_expr(&conv::normalize(b)?)
                            ),
                        ))
                    }
                }
                _ => Err(perr("conv", "conv proves equations")),
            },
            Rule::ConvFrom(h) => {
                let f = resolve_hyp(ctx, h)?;
                let a = normalize_formula(stated)?;
                let b = normalize_formula(&f)?;
                expect_alpha(&a, &b, "conv_from (normalized)")
            }
            Rule::Mp(h1, h2) => {
                let f1 = resolve_hyp(ctx, h1)?;
                let (a, b) = match f1 {
                    Formula::Imp(a, b) => (a, b),
                    _ => return Err(perr("mp", "first reference is not an implication")),
                };
                let f2 = resolve_hyp(ctx, h2)?;
                expect_alpha(&f2, &a, "mp antecedent")?;
                expect_alpha(stated, &b, "mp")
            }
            Rule::AndIntro(h1, h2) => match stated {
                Formula::And(a, b) => {
                    expect_alpha(&resolve_hyp(ctx, h1)?, a, "and_intro left")?;
                    expect_alpha(&resolve_hyp(ctx, h2)?, b, "and_intro right")
                }
                _ => Err(perr("and_intro", "stated formula is not a conjunction")),
            },
            Rule::AndLeft(h) => match resolve_hyp(ctx, h)? {
                Formula::And(a, _) => expect_alpha(stated, &a, "and_left"),
                _ => Err(perr("and_left", "hypothesis is not a conjunction")),
            },
            Rule::AndRight(h) => match resolve_hyp(ctx, h)? {
                Formula::And(_, b) => expect_alpha(stated, &b, "and_right"),
                _ => Err(perr("and_right", "hypothesis is not a conjunction")),
            },
            Rule::ForallElim(h, args) => {
                let f = resolve_hyp(ctx, h)?;
                let inst = self.forall_elim(ctx, f, args)?;
                expect_alpha(stated, &inst, "forall_elim")
            }
            Rule::ExistsIntro(w, h) => match stated {
                Formula::Exists(x, t, b) => {
                    let w = self.prep_expr(ctx, w, Some(t))?;
                    let inst = subst_formula(b, x, &w);
                    expect_alpha(&resolve_hyp(ctx, h)?, &inst, "exists_intro")
                }
                _ => Err(perr("exists_intro", "stated formula is not existential")),
            },
            Rule::Absurd(hn, hp) => {
                let fn_ = resolve_hyp(ctx, hn)?;
                let inner = match fn_ {
                    Formula::Not(a) => a,
                    _ => return Err(perr("absurd", "first reference is not a negation")),
                };
                expect_alpha(&resolve_hyp(ctx, hp)?, &inner, "absurd")
            }
            Rule::BotElim(h) => match resolve_hyp(ctx, h)? {
                Formula::Bot => Ok(()),
                _ => Err(perr("bot_elim", "hypothesis is not bottom")),
            },
            Rule::Field { using } => {
                let (a, b) = match stated {
                    Formula::Eq(a, b) => (a, b),
                    _ => return Err(perr("field", "field proves equations")),
                };
                let a = conv::normalize(a)?;
                let b = conv::normalize(b)?;
                let (ta, _) = infer_expr(ctx, &a)?;
                let (tb, _) = infer_expr(ctx, &b)?;
                // Literals are polymorphic; take the most specific side.
                let t = match (&ta, &tb) {
                    (TypeTerm::PReal, _) | (_, TypeTerm::PReal) => TypeTerm::PReal,
                    (TypeTerm::Real, _) | (_, TypeTerm::Real) => TypeTerm::Real,
                    _ => ta.clone(),
                };
                let sort = sort_of_type(&t)
                    .ok_or_else(|| perr("field", format!("non-numeric equation at `{t}`")))?;
                let outcome = field_eq(&a, &b, sort)?
                    .ok_or_else(|| perr("field", "normal forms differ"))?;
                for ob in outcome.obligations {
                    self.discharge(ctx, &ob, using, "field obligation")?;
                }
                Ok(())
            }
            Rule::Schema {
                name,
                terms,
                types,
                using,
            } => {
                let mut tmap = BTreeMap::new();
                for (k, e) in terms {
                    tmap.insert(k.clone(), desugar_expr(e, self.env)?);
                }
                let mut tymap = BTreeMap::new();
                for (k, t) in types {
                    tymap.insert(k.clone(), t.clone());
                }
                let inst = schema::instantiate(
                    ctx,
                    name,
                    &schema::Bindings {
                        terms: &tmap,
                        types: &tymap,
                    },
                )?;
                let concl = check_formula_wf(ctx, &conv::fold_ground_formula(&inst.conclusion))
                    .map_err(|e| {
                        perr(
                            "schema",
                            format!("instance of '{name}' is ill-formed: {e}"),
                        )
                    })?;
                expect_alpha(stated, &concl, &format!("schema {name}"))?;
                for cond in inst.conditions {
                    let cond = check_formula_wf(ctx, &cond)?;
                    self.discharge(ctx, &cond, using, &format!("schema {name} side condition"))?;
                }
                Ok(())
            }
            Rule::Rewrite { src, spec } => {
                let f = resolve_hyp(ctx, src)?;
                let out = self.apply_rewrite(ctx, &f, spec)?;
                expect_alpha(stated, &out, "rewrite")
            }
            Rule::ECong(h) => {
                let (x, _t, b1, b2) = forall_eq_parts(&resolve_hyp(ctx, h)?)
                    .ok_or_else(|| perr("e_cong", "hypothesis must be forall x. t1 = t2"))?;
                match stated {
                    Formula::Eq(
                        Expr::Expect {
                            binder: y1,
                            src: s1,
                            body: c1,
                        },
                        Expr::Expect {
                            binder: y2,
                            src: s2,
                            body: c2,
                        },
                    ) => {
                        if !alpha_eq_expr(s1, s2) {
                            return Err(perr("e_cong", "sources differ"));
                        }
                        let lam = |y: &str, c: &Expr| {
                            Expr::Lam(y.to_string(), TypeTerm::Hole, Box::new(c.clone()))
                        };
                        expect_alpha_expr(&lam(y1, c1), &lam(&x, &b1), "e_cong lhs")?;
                        expect_alpha_expr(&lam(y2, c2), &lam(&x, &b2), "e_cong rhs")
                    }
                    _ => Err(perr("e_cong", "stated formula must equate expectations")),
                }
            }
            Rule::Funext(h) => {
                let (x, _t, b1, b2) = forall_eq_parts(&resolve_hyp(ctx, h)?)
                    .ok_or_else(|| perr("funext", "hypothesis must be forall x. t1 = t2"))?;
                match stated {
                    Formula::Eq(Expr::Lam(y1, t1, c1), Expr::Lam(y2, t2, c2)) => {
                        if t1 != t2 {
                            return Err(perr("funext", "binder annotations differ"));
                        }
                        let lam = |y: &str, t: &TypeTerm, c: &Expr| {
                            Expr::Lam(y.to_string(), t.clone(), Box::new(c.clone()))
                        };
                        expect_alpha_expr(
                            &lam(y1, t1, c1),
                            &lam(&x, t1, &b1),
                            "funext lhs",
                        )?;
                        expect_alpha_expr(&lam(y2, t2, c2), &lam(&x, t2, &b2), "funext rhs")
                    }
                    _ => Err(perr("funext", "stated formula must equate lambdas")),
                }
            }
            Rule::Lemma { name, args } => {
                let entry = self
                    .lemmas
                    .get(name)
                    .ok_or_else(|| perr("lemma", format!("unknown lemma '{name}'")))?;
                for a in &entry.assumptions {
                    self.note_assumption(a)?;
                }
                let inst = self.forall_elim(ctx, entry.exported.clone(), args)?;
                expect_alpha(stated, &inst, &format!("lemma {name}"))
            }
            Rule::Assume(name) => {
                let f = self
                    .assumptions
                    .get(name)
                    .ok_or_else(|| perr("assume", format!("unregistered assumption '{name}'")))?;
                self.note_assumption(name)?;
                expect_alpha(stated, f, &format!("assume {name}"))
            }
        }
    }

    fn note_assumption(&mut self, name: &str) -> Result<()> {
        if self.no_assumptions {
            return Err(perr(
                "assume",
                format!("assumption '{name}' used under --no-assumptions"),
            ));
        }
        self.used.insert(name.to_string());
        Ok(())
    }

    fn forall_elim(&mut self, ctx: &Context, mut f: Formula, args: &[Expr]) -> Result<Formula> {
        for a in args {
            match f {
                Formula::Forall(x, t, b) => {
                    let a2 = self.prep_expr(ctx, a, Some(&t))?;
                    f = subst_formula(&b, &x, &a2);
                }
                other => {
                    return Err(perr(
                        "forall_elim",
                        format!(
                            "not universally quantified: `{}`",
                            crate::printer::print_formula(&other)
                        ),
                    ))
                }
            }
        }
        Ok(f)
    }

    fn discharge_by_oracle(&mut self, f: &Formula) -> Result<()> {
        if oracle::decide(f)? {
            self.oracle_log.push(crate::printer::print_formula(f));
            Ok(())
        } else {
            Err(perr(
                "oracle",
                format!("`{}` is false", crate::printer::print_formula(f)),
            ))
        }
    }

    /// Discharge a side condition: try the ground oracle first, then the
    /// provided hypothesis names.
    fn discharge(
        &mut self,
        ctx: &Context,
        cond: &Formula,
        using: &[String],
        what: &str,
    ) -> Result<()> {
        let normalized = normalize_formula(cond)?;
        if let Ok(true) = oracle::decide(&normalized) {
            self.oracle_log
                .push(crate::printer::print_formula(&normalized));
            return Ok(());
        }
        for h in using {
            if let Ok(f) = hyp_of(ctx, h) {
                if alpha_eq_formula(f, cond) || alpha_eq_formula(f, &normalized) {
                    return Ok(());
                }
                if let Ok(fn_) = normalize_formula(f) {
                    if alpha_eq_formula(&fn_, &normalized) {
                        return Ok(());
                    }
                }
                // Conjunction conditions may be discharged piecewise.
            }
        }
        // Or split a conjunction and try each part.
        if let Formula::And(a, b) = cond {
            if self.discharge(ctx, a, using, what).is_ok()
                && self.discharge(ctx, b, using, what).is_ok()
            {
                return Ok(());
            }
        }
        Err(perr(
            what,
            format!(
                "undischarged side condition `{}` (cite it via 'using')",
                crate::printer::print_formula(cond)
            ),
        ))
    }

    // ------------------------------------------------------------------
    // Letrec induction
    // ------------------------------------------------------------------

    fn check_letrec_ind(&mut self, ctx: &Context, goal: &Formula, ind: &LetrecInd) -> Result<()> {
        if ind.defs.is_empty() {
            return Err(perr("letrec_ind", "no recursive definitions given"));
        }
        let pre = self.prep_formula(&ctx.with_var(&ind.x, TypeTerm::Hole), &ind.pre);
        // `pre` mentions x whose type we discover from the definitions.
        let mut terms = Vec::new();
        let mut dom = None;
        for d in &ind.defs {
            let e = self.prep_expr(ctx, &d.term, None)?;
            let (t, e2) = infer_expr(ctx, &e)?;
            let (i, cod) = match &t {
                TypeTerm::Arrow(i, cod) => ((**i).clone(), (**cod).clone()),
                _ => return Err(perr("letrec_ind", "definition is not a function")),
            };
            match &dom {
                None => dom = Some(i.clone()),
                Some(d0) if *d0 == i => {}
                _ => return Err(perr("letrec_ind", "recursion domains differ")),
            }
            let (f, x, body) = match &e2 {
                Expr::Letrec { f, x, body, .. } => (f.clone(), x.clone(), (**body).clone()),
                _ => return Err(perr("letrec_ind", "definition is not a letrec")),
            };
            terms.push((d.slot.clone(), e2.clone(), f, x, body, cod));
        }
        let dom = dom.unwrap();
        if !matches!(dom, TypeTerm::Int | TypeTerm::List(_)) {
            return Err(perr("letrec_ind", "recursion domain must be int or list"));
        }
        drop(pre);
        let xctx = ctx.with_var(&ind.x, dom.clone());
        let pre = self.prep_formula(&xctx, &ind.pre)?;

        // Postcondition is stated over the slot placeholders.
        let mut post_ctx = xctx.clone();
        for (slot, _, _, _, _, cod) in &terms {
            post_ctx.push_var(slot, cod.clone());
        }
        let post = self.prep_formula(&post_ctx, &ind.post)?;

        // Expected goal: forall x : I. pre => post[T x / slot].
        let mut call_map = BTreeMap::new();
        for (slot, term, _, _, _, _) in &terms {
            call_map.insert(slot.clone(), Expr::app(term.clone(), Expr::var(&ind.x)));
        }
        let expected = Formula::Forall(
            ind.x.clone(),
            dom.clone(),
            Box::new(Formula::imp(
                pre.clone(),
                subst_formula_many(&post, &call_map),
            )),
        );
        expect_alpha(goal, &expected, "letrec_ind goal")?;

        // Premise context: x, the recursive functions, the precondition and
        // the induction hypothesis for smaller arguments.
        let mut pctx = ctx.with_var(&ind.x, dom.clone());
        for (_, _, f, _, _, cod) in &terms {
            if pctx.lookup(f).is_some() {
                return Err(perr(
                    "letrec_ind",
                    format!("recursion name '{f}' shadows an existing variable"),
                ));
            }
            pctx.push_var(f, TypeTerm::arrow(dom.clone(), cod.clone()));
        }
        let m = crate::subst::fresh_name("m", &{
            let mut s: BTreeSet<String> = crate::subst::free_vars_formula(&post);
            s.extend(crate::subst::free_vars_formula(&pre));
            s.insert(ind.x.clone());
            s
        });
        let size = |e: Expr| match &dom {
            TypeTerm::Int => Expr::prim(Prim::Abs, vec![e]),
            _ => Expr::prim(Prim::Len, vec![e]),
        };
        let mut ih_map = BTreeMap::new();
        for (slot, _, f, _, _, _) in &terms {
            ih_map.insert(
                slot.clone(),
                Expr::app(Expr::var(f), Expr::var(&m)),
            );
        }
        let ih_body = Formula::imp(
            Formula::lt(size(Expr::var(&m)), size(Expr::var(&ind.x))),
            Formula::imp(
                subst_formula(&pre, &ind.x, &Expr::var(&m)),
                subst_formula(&subst_formula_many(&post, &ih_map), &ind.x, &Expr::var(&m)),
            ),
        );
        let ih = Formula::Forall(m.clone(), dom.clone(), Box::new(ih_body));
        pctx.push_hyp(&format!("{}_pre", ind.ih), pre);
        pctx.push_hyp(&ind.ih, ih);

        // Premise goal: post with each slot replaced by the unfolded body.
        let mut body_map = BTreeMap::new();
        for (slot, _, _, xj, body, _) in &terms {
            body_map.insert(
                slot.clone(),
                crate::subst::subst_expr(body, xj, &Expr::var(&ind.x)),
            );
        }
        let premise = subst_formula_many(&post, &body_map);
        self.check_pl(&pctx, &premise, &ind.body)
    }
}

fn ensure_done(next: Option<&Step>, what: &str) -> Result<()> {
    match next {
        None => Ok(()),
        Some(s) => Err(perr(
            what,
            format!("trailing step {s:?} after the goal was closed"),
        )),
    }
}

pub fn hyp_of<'c>(ctx: &'c Context, h: &str) -> Result<&'c Formula> {
    ctx.hyp(h)
        .ok_or_else(|| perr("hyp", format!("unknown hypothesis '{h}'")))
}

/// Resolve a hypothesis reference, projecting through conjunctions.
pub fn resolve_hyp(ctx: &Context, h: &HypRef) -> Result<Formula> {
    match h {
        HypRef::Name(n) => hyp_of(ctx, n).cloned(),
        HypRef::Left(inner) => match resolve_hyp(ctx, inner)? {
            Formula::And(a, _) => Ok(*a),
            other => Err(perr(
                "and_left",
                format!(
                    "`{}` is not a conjunction",
                    crate::printer::print_formula(&other)
                ),
            )),
        },
        HypRef::Right(inner) => match resolve_hyp(ctx, inner)? {
            Formula::And(_, b) => Ok(*b),
            other => Err(perr(
                "and_right",
                format!(
                    "`{}` is not a conjunction",
                    crate::printer::print_formula(&other)
                ),
            )),
        },
        HypRef::Pair(a, b) => Ok(Formula::and(
            resolve_hyp(ctx, a)?,
            resolve_hyp(ctx, b)?,
        )),
        HypRef::Mp(f, a) => {
            let imp = resolve_hyp(ctx, f)?;
            let arg = resolve_hyp(ctx, a)?;
            match imp {
                Formula::Imp(ante, concl) => {
                    if crate::subst::alpha_eq_formula(&ante, &arg) {
                        Ok(*concl)
                    } else {
                        Err(perr(
                            "mp",
                            format!(
                                "antecedent `{}` does not match `{}`",
                                crate::printer::print_formula(&ante),
                                crate::printer::print_formula(&arg)
                            ),
                        ))
                    }
                }
                other => Err(perr(
                    "mp",
                    format!(
                        "`{}` is not an implication",
                        crate::printer::print_formula(&other)
                    ),
                )),
            }
        }
    }
}

fn expect_alpha(stated: &Formula, computed: &Formula, what: &str) -> Result<()> {
    if alpha_eq_formula(stated, computed) {
        Ok(())
    } else {
        Err(perr(
            what,
            format!(
                "stated `{}`\n  does not match derived `{}`",
                crate::printer::print_formula(stated),
                crate::printer::print_formula(computed)
            ),
        ))
    }
}

fn expect_alpha_expr(stated: &Expr, computed: &Expr, what: &str) -> Result<()> {
    if alpha_eq_expr(stated, computed) {
        Ok(())
    } else {
        Err(perr(
            what,
            format!(
                "stated `{}` does not match derived `{}`",
                crate::printer::print_expr(stated),
                crate::printer::print_expr(computed)
            ),
        ))
    }
}

fn forall_eq_parts(f: &Formula) -> Option<(String, TypeTerm, Expr, Expr)> {
    match f {
        Formula::Forall(x, t, b) => match &**b {
            Formula::Eq(l, r) => Some((x.clone(), t.clone(), l.clone(), r.clone())),
            _ => None,
        },
        _ => None,
    }
}
