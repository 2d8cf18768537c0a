//! Sequential processing of `.ppv` items: programs, assumption registrations,
//! lifting-parameter declarations (with their monotonicity gate) and proof
//! scripts. Checked lemmas become reusable; certificates are returned in item
//! order.

use crate::ast::{Context, Expr, Formula, R, R1, R2};
use crate::desugar::{desugar_expr, desugar_formula};
use crate::error::{CoreError, Result};
use crate::kernel::{AssumptionTable, Certificate, Kernel, LemmaEntry, LemmaStore};
use crate::liftings::{GradeMonoid, LiftKind, LiftParam, MacroEnv};
use crate::script::{parse_file, GoalSpec, Item, ProofItem};
use crate::subst::alpha_eq_formula;
use crate::typecheck::{check_expr, check_formula_wf, infer_expr};
use crate::types::TypeTerm;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub struct ProgramEntry {
    pub ctx: Context,
    /// Elaborated, desugared body.
    pub body: Expr,
    pub ty: TypeTerm,
    /// The body as written, for printing.
    pub source: Expr,
}

pub struct World {
    pub lemmas: LemmaStore,
    pub assumptions: AssumptionTable,
    pub env: MacroEnv,
    pub programs: BTreeMap<String, ProgramEntry>,
    /// Lifting parameters whose monotonicity obligation has been certified.
    pub active_params: BTreeSet<String>,
    /// Declared parameters awaiting their monotonicity lemma.
    pending: BTreeMap<String, Formula>,
}

impl Default for World {
    fn default() -> Self {
        World::new()
    }
}

impl World {
    pub fn new() -> World {
        let env = MacroEnv::default();
        // The built-in parameters also go through the monotonicity gate: a
        // `<name>_monotone` lemma must certify them before use.
        let mut pending = BTreeMap::new();
        for name in ["S_ub", "S_cpl"] {
            if let Ok(p) = env.get(name) {
                if let crate::ast::Judgment::Pl { ctx, goal } = p.monotonicity_obligation() {
                    pending.insert(name.to_string(), LemmaStore::export(&ctx, &goal));
                }
            }
        }
        World {
            lemmas: LemmaStore::new(),
            assumptions: AssumptionTable::new(),
            env,
            programs: BTreeMap::new(),
            active_params: BTreeSet::new(),
            pending,
        }
    }

    /// Load a `.ppv` source, checking proofs as they appear.
    pub fn load_str(
        &mut self,
        src: &str,
        no_assumptions: bool,
    ) -> Result<Vec<(String, Certificate)>> {
        let items = parse_file(src)?;
        let mut certs = Vec::new();
        for item in items {
            match item {
                Item::Program { name, ctx, body } => {
                    self.add_program(&name, ctx, body)?;
                }
                Item::Assumption { name, ctx, formula } => {
                    self.add_assumption(&name, ctx, formula)?;
                }
                Item::Lifting {
                    name,
                    relational,
                    monoid,
                    obs,
                    test,
                } => {
                    self.declare_lifting(&name, relational, &monoid, obs, test)?;
                }
                Item::Proof(p) => {
                    let cert = self.check_proof(&p, no_assumptions)?;
                    certs.push((p.name.clone(), cert));
                }
            }
        }
        Ok(certs)
    }

    pub fn add_program(&mut self, name: &str, ctx: Context, body: Expr) -> Result<()> {
        let d = desugar_expr(&body, &self.env)?;
        let (ty, elaborated) = infer_expr(&ctx, &d)?;
        self.programs.insert(
            name.to_string(),
            ProgramEntry {
                ctx,
                body: elaborated,
                ty,
                source: body,
            },
        );
        Ok(())
    }

    pub fn add_assumption(&mut self, name: &str, ctx: Context, formula: Formula) -> Result<()> {
        let d = desugar_formula(&formula, &self.env)?;
        let wf = check_formula_wf(&ctx, &d)?;
        self.assumptions
            .register(name, LemmaStore::export(&ctx, &wf));
        Ok(())
    }

    pub fn declare_lifting(
        &mut self,
        name: &str,
        relational: bool,
        monoid: &str,
        obs: Vec<TypeTerm>,
        test: Formula,
    ) -> Result<()> {
        let monoid = GradeMonoid::by_name(monoid)
            .ok_or_else(|| CoreError::Other(format!("unknown grading monoid '{monoid}'")))?;
        let kind = if relational {
            if obs.len() != 2 {
                return Err(CoreError::Other(
                    "relational lifting needs two observation types".into(),
                ));
            }
            LiftKind::Relational {
                obs_ty1: obs[0].clone(),
                obs_ty2: obs[1].clone(),
            }
        } else {
            LiftKind::Unary {
                obs_ty: obs[0].clone(),
            }
        };
        let param = LiftParam {
            name: name.to_string(),
            monoid,
            kind,
            test: {
                let d = desugar_formula(&test, &self.env)?;
                // Well-formedness in the parameter's own context.
                let ob = LiftParam {
                    name: name.to_string(),
                    monoid,
                    kind: match (&obs[..], relational) {
                        ([t], false) => LiftKind::Unary { obs_ty: t.clone() },
                        ([t1, t2], true) => LiftKind::Relational {
                            obs_ty1: t1.clone(),
                            obs_ty2: t2.clone(),
                        },
                        _ => unreachable!(),
                    },
                    test: d.clone(),
                };
                let oblig = ob.monotonicity_obligation();
                if let crate::ast::Judgment::Pl { ctx, .. } = &oblig {
                    check_formula_wf(ctx, &d)?;
                }
                d
            },
        };
        let oblig = match param.monotonicity_obligation() {
            crate::ast::Judgment::Pl { ctx, goal } => LemmaStore::export(&ctx, &goal),
            _ => unreachable!(),
        };
        self.pending.insert(name.to_string(), oblig);
        self.env.register(param);
        Ok(())
    }

    /// The monotonicity goal a `<param>_monotone` lemma must prove.
    pub fn pending_obligation(&self, param: &str) -> Option<&Formula> {
        self.pending.get(param)
    }

    fn scan_params(&self, f: &Formula, used: &mut BTreeSet<String>) {
        match f {
            Formula::MacULift { param, body, .. } | Formula::MacRLift { param, body, .. } => {
                used.insert(param.clone());
                self.scan_params(body, used);
            }
            Formula::And(a, b) | Formula::Imp(a, b) | Formula::MacIff(a, b) => {
                self.scan_params(a, used);
                self.scan_params(b, used);
            }
            Formula::Not(a)
            | Formula::Forall(_, _, a)
            | Formula::Exists(_, _, a)
            | Formula::MacSup { cond: a, .. } => self.scan_params(a, used),
            _ => {}
        }
    }

    fn ensure_params_active(&self, f: &Formula) -> Result<()> {
        let mut used = BTreeSet::new();
        self.scan_params(f, &mut used);
        for p in used {
            if !self.active_params.contains(&p) {
                return Err(CoreError::Other(format!(
                    "lifting parameter '{p}' used before its monotonicity certificate"
                )));
            }
        }
        Ok(())
    }

    pub fn check_proof(&mut self, item: &ProofItem, no_assumptions: bool) -> Result<Certificate> {
        // Elaborate the header: context hypotheses then the goal.
        let mut ctx = Context {
            vars: item.ctx.vars.clone(),
            hyps: Vec::new(),
        };
        for (h, f) in &item.ctx.hyps {
            self.ensure_params_active(f)?;
            let d = desugar_formula(f, &self.env)?;
            let wf = check_formula_wf(&ctx, &d)?;
            ctx.push_hyp(h, wf);
        }

        let mut kernel = Kernel::new(&self.lemmas, &self.assumptions, &self.env);
        kernel.no_assumptions = no_assumptions;

        let (goal_desc, exported) = match &item.goal {
            GoalSpec::Pl(f) => {
                self.ensure_params_active(f)?;
                let d = desugar_formula(f, &self.env)?;
                let wf = check_formula_wf(&ctx, &d)?;
                kernel.check_pl(&ctx, &wf, &item.steps)?;
                (
                    crate::printer::print_formula(&wf),
                    LemmaStore::export(&ctx, &wf),
                )
            }
            GoalSpec::Upl { subject, ty, post } => {
                self.ensure_params_active(post)?;
                let subj = desugar_expr(subject, &self.env)?;
                let subj = check_expr(&ctx, &subj, ty)?;
                let post_d = desugar_formula(post, &self.env)?;
                let post_wf = check_formula_wf(&ctx.with_var(R, ty.clone()), &post_d)?;
                crate::logics::check_upl(
                    &mut kernel,
                    &ctx,
                    &subj,
                    ty,
                    &post_wf,
                    &item.steps,
                )?;
                let pl_form = crate::subst::subst_formula(&post_wf, R, &subj);
                (
                    format!(
                        "{} : {} | {}",
                        crate::printer::print_expr(&subj),
                        ty,
                        crate::printer::print_formula(&post_wf)
                    ),
                    LemmaStore::export(&ctx, &pl_form),
                )
            }
            GoalSpec::Rpl {
                left,
                left_ty,
                right,
                right_ty,
                post,
            } => {
                self.ensure_params_active(post)?;
                let l = desugar_expr(left, &self.env)?;
                let l = check_expr(&ctx, &l, left_ty)?;
                let r = desugar_expr(right, &self.env)?;
                let r = check_expr(&ctx, &r, right_ty)?;
                let post_d = desugar_formula(post, &self.env)?;
                let post_wf = check_formula_wf(
                    &ctx.with_var(R1, left_ty.clone()).with_var(R2, right_ty.clone()),
                    &post_d,
                )?;
                crate::logics::check_rpl(
                    &mut kernel,
                    &ctx,
                    (&l, left_ty),
                    (&r, right_ty),
                    &post_wf,
                    &item.steps,
                )?;
                let mut m = BTreeMap::new();
                m.insert(R1.to_string(), l.clone());
                m.insert(R2.to_string(), r.clone());
                let pl_form = crate::subst::subst_formula_many(&post_wf, &m);
                (
                    format!(
                        "{} : {} ~ {} : {} | {}",
                        crate::printer::print_expr(&l),
                        left_ty,
                        crate::printer::print_expr(&r),
                        right_ty,
                        crate::printer::print_formula(&post_wf)
                    ),
                    LemmaStore::export(&ctx, &pl_form),
                )
            }
        };

        let cert = kernel.certificate(goal_desc);

        // A `<param>_monotone` lemma activates its lifting parameter.
        if let Some(param) = item.name.strip_suffix("_monotone") {
            if let Some(oblig) = self.pending.get(param) {
                if alpha_eq_formula(oblig, &exported) && cert.assumptions.is_empty() {
                    self.active_params.insert(param.to_string());
                } else if !alpha_eq_formula(oblig, &exported) {
                    return Err(CoreError::Other(format!(
                        "lemma '{}' does not match the monotonicity obligation of '{param}'",
                        item.name
                    )));
                }
            }
        }

        self.lemmas.insert(
            &item.name,
            LemmaEntry {
                exported,
                assumptions: kernel.used_assumptions().clone(),
            },
        );
        Ok(cert)
    }
}
