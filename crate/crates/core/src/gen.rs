//! Random loop-free programs and categories for cross-validating the
//! verifier against the oracle.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::explore::Category;
use crate::lang::{BinaryOp, Expr, Program, SecurityLabel, Stmt, UnaryOp, Value, VarDecl, VarId};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_threads: usize,
    pub max_stmts_per_thread: usize,
    pub max_low: usize,
    pub max_high: usize,
    /// Literals and initial values are drawn from `0..=max_value`.
    pub max_value: Value,
    /// Upper bound on the longest execution at statement granularity.
    pub max_total_steps: usize,
    pub max_categories: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_threads: 3,
            max_stmts_per_thread: 4,
            max_low: 3,
            max_high: 2,
            max_value: 3,
            max_total_steps: 10,
            max_categories: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Case {
    pub program: Program,
    pub categories: Vec<Category>,
}

pub fn random_case<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Case {
    let program = loop {
        let p = random_program(rng, cfg);
        if p.threads.iter().map(|t| max_steps(t)).sum::<usize>() <= cfg.max_total_steps {
            break p;
        }
    };
    let categories = random_categories(rng, &program, cfg);
    Case {
        program,
        categories,
    }
}

/// Longest possible execution of a loop-free block, in statement-granularity steps.
pub fn max_steps(block: &[Stmt]) -> usize {
    block
        .iter()
        .map(|s| match s {
            Stmt::Skip | Stmt::Assign { .. } => 1,
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => 1 + max_steps(then_branch).max(max_steps(else_branch)),
            Stmt::While { .. } => usize::MAX / 4,
        })
        .sum()
}

pub fn random_program<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Program {
    let nlow = rng.gen_range(0..=cfg.max_low);
    let nhigh = rng.gen_range(0..=cfg.max_high);
    let mut decls = Vec::new();
    for i in 0..nlow {
        decls.push(VarDecl {
            name: format!("l{}", i + 1),
            label: SecurityLabel::Low,
            id: VarId(i as u32 + 1),
            init: rng.gen_range(0..=cfg.max_value),
        });
    }
    for i in 0..nhigh {
        decls.push(VarDecl {
            name: format!("h{}", i + 1),
            label: SecurityLabel::High,
            id: VarId((nlow + i) as u32 + 1),
            init: rng.gen_range(0..=1),
        });
    }
    let nvars = decls.len() as u32;
    let nthreads = rng.gen_range(1..=cfg.max_threads);
    let threads = (0..nthreads)
        .map(|_| {
            let n = rng.gen_range(1..=cfg.max_stmts_per_thread);
            (0..n).map(|_| random_stmt(rng, nvars, cfg, true)).collect()
        })
        .collect();
    Program::new(decls, threads).expect("generated programs are well-formed")
}

fn random_stmt<R: Rng + ?Sized>(rng: &mut R, nvars: u32, cfg: &GenConfig, allow_if: bool) -> Stmt {
    let roll = rng.gen_range(0..10);
    if nvars == 0 || roll == 0 {
        return Stmt::Skip;
    }
    if allow_if && roll >= 7 {
        let branch = |rng: &mut R| -> Vec<Stmt> {
            if rng.gen_bool(0.3) {
                Vec::new()
            } else {
                vec![random_stmt(rng, nvars, cfg, false)]
            }
        };
        return Stmt::If {
            guard: random_expr(rng, nvars, cfg, 1),
            then_branch: branch(rng),
            else_branch: branch(rng),
        };
    }
    Stmt::Assign {
        target: VarId(rng.gen_range(1..=nvars)),
        rhs: random_expr(rng, nvars, cfg, 1),
    }
}

fn random_expr<R: Rng + ?Sized>(rng: &mut R, nvars: u32, cfg: &GenConfig, depth: u32) -> Expr {
    let leaf = |rng: &mut R| {
        if rng.gen_bool(0.5) {
            Expr::Var(VarId(rng.gen_range(1..=nvars)))
        } else {
            Expr::Lit(rng.gen_range(0..=cfg.max_value))
        }
    };
    match rng.gen_range(0..6) {
        0..=2 => leaf(rng),
        3 if depth > 0 => Expr::unary(UnaryOp::Not, random_expr(rng, nvars, cfg, depth - 1)),
        _ if depth > 0 => {
            let op = *[
                BinaryOp::Add,
                BinaryOp::Sub,
                BinaryOp::Eq,
                BinaryOp::Ne,
                BinaryOp::Lt,
                BinaryOp::Le,
                BinaryOp::And,
                BinaryOp::Or,
            ]
            .choose(rng)
            .unwrap();
            Expr::binary(
                op,
                random_expr(rng, nvars, cfg, depth - 1),
                random_expr(rng, nvars, cfg, depth - 1),
            )
        }
        _ => leaf(rng),
    }
}

/// One to `max_categories` categories with pairwise distinct low stores and
/// high domains drawn from the non-empty subsets of `{0, 1}`.
pub fn random_categories<R: Rng + ?Sized>(
    rng: &mut R,
    program: &Program,
    cfg: &GenConfig,
) -> Vec<Category> {
    let want = rng.gen_range(1..=cfg.max_categories.max(1));
    let mut lows: Vec<BTreeMap<VarId, Value>> = Vec::new();
    for _ in 0..want * 4 {
        if lows.len() == want {
            break;
        }
        let low: BTreeMap<VarId, Value> = program
            .low_decls()
            .map(|d| (d.id, rng.gen_range(0..=cfg.max_value)))
            .collect();
        if !lows.contains(&low) {
            lows.push(low);
        }
    }
    lows.into_iter()
        .enumerate()
        .map(|(i, low)| {
            let highs: BTreeMap<VarId, Vec<Value>> = program
                .high_decls()
                .map(|d| {
                    let dom = match rng.gen_range(0..3) {
                        0 => vec![0],
                        1 => vec![1],
                        _ => vec![0, 1],
                    };
                    (d.id, dom)
                })
                .collect();
            Category::new(program, format!("c{i}"), &low, &highs).expect("valid by construction")
        })
        .collect()
}
