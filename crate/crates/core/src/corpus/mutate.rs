use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ast::BinOp;
use super::{build_cfg, parse, MiniProgram};
use crate::error::{Error, Result};

/// Operator-substitution classes. Each mutable operator belongs to exactly
/// one class and has exactly one replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationKind {
    /// `+ <-> -`, `* <-> /`
    Arithmetic,
    /// `< <-> <=`, `> <-> >=`, `== <-> !=`
    Relational,
    /// `& <-> |`
    Bitwise,
}

impl MutationKind {
    pub fn of(op: BinOp) -> Option<MutationKind> {
        match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => Some(MutationKind::Arithmetic),
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => {
                Some(MutationKind::Relational)
            }
            BinOp::BitAnd | BinOp::BitOr => Some(MutationKind::Bitwise),
            BinOp::Rem | BinOp::BitXor => None,
        }
    }
}

pub fn replacement(op: BinOp) -> Option<BinOp> {
    Some(match op {
        BinOp::Add => BinOp::Sub,
        BinOp::Sub => BinOp::Add,
        BinOp::Mul => BinOp::Div,
        BinOp::Div => BinOp::Mul,
        BinOp::Lt => BinOp::Le,
        BinOp::Le => BinOp::Lt,
        BinOp::Gt => BinOp::Ge,
        BinOp::Ge => BinOp::Gt,
        BinOp::Eq => BinOp::Ne,
        BinOp::Ne => BinOp::Eq,
        BinOp::BitAnd => BinOp::BitOr,
        BinOp::BitOr => BinOp::BitAnd,
        BinOp::Rem | BinOp::BitXor => return None,
    })
}

/// A single operator substitution.
///
/// `site` indexes the program's mutable operators in source order (see
/// [`mutable_sites`]). `seed` records the draw that selected this mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationOp {
    pub kind: MutationKind,
    pub site: usize,
    pub seed: u64,
}

/// A mutable operator occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutableSite {
    pub op: BinOp,
    pub kind: MutationKind,
    pub offset: usize,
}

pub fn mutable_sites(p: &MiniProgram) -> Result<Vec<MutableSite>> {
    let f = parse(&p.source)?;
    Ok(f.binary_operators()
        .into_iter()
        .filter_map(|(op, offset)| {
            MutationKind::of(op).map(|kind| MutableSite { op, kind, offset })
        })
        .collect())
}

fn describe_sites(sites: &[MutableSite]) -> String {
    let list: Vec<String> = sites
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{i}:{}({:?})", s.op, s.kind))
        .collect();
    if list.is_empty() {
        "none".into()
    } else {
        list.join(", ")
    }
}

/// Applies one operator substitution.
///
/// The result differs from `p` in exactly one operator token; its CFG has
/// the same nodes and edges as the parent's with exactly one label changed.
pub fn mutate(p: &MiniProgram, op: &MutationOp) -> Result<MiniProgram> {
    let sites = mutable_sites(p)?;
    let site = sites
        .get(op.site)
        .filter(|s| s.kind == op.kind)
        .ok_or_else(|| {
            Error::Mutation(format!(
                "{}: no {:?} operator at site {}; mutable sites: {}",
                p.name,
                op.kind,
                op.site,
                describe_sites(&sites)
            ))
        })?;
    let new_op = replacement(site.op).expect("mutable operators have a replacement");
    let old_len = site.op.symbol().len();
    let mut source = String::with_capacity(p.source.len() + 1);
    source.push_str(&p.source[..site.offset]);
    source.push_str(new_op.symbol());
    source.push_str(&p.source[site.offset + old_len..]);
    let mutant = MiniProgram {
        name: p.name.clone(),
        source,
    };

    let before = build_cfg(&parse(&p.source)?)?;
    let after = build_cfg(&parse(&mutant.source)?)?;
    let changed = before
        .labels()
        .iter()
        .zip(after.labels())
        .filter(|(a, b)| a != b)
        .count();
    if before.node_count() != after.node_count() || before.edges() != after.edges() || changed != 1
    {
        return Err(Error::Mutation(format!(
            "{}: substituting site {} changed the CFG shape",
            p.name, op.site
        )));
    }
    Ok(mutant)
}

/// Draws `count` mutations of `p` from `seed`: sites are chosen uniformly
/// without replacement, and only start repeating once every site was used.
pub fn sample_mutations(p: &MiniProgram, count: usize, seed: u64) -> Result<Vec<MutationOp>> {
    let sites = mutable_sites(p)?;
    if sites.is_empty() && count > 0 {
        return Err(Error::Mutation(format!(
            "{}: program has no mutable operator",
            p.name
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut pool: Vec<usize> = Vec::new();
    while out.len() < count {
        if pool.is_empty() {
            pool = (0..sites.len()).collect();
            pool.shuffle(&mut rng);
        }
        let site = pool.pop().expect("pool refilled above");
        out.push(MutationOp {
            kind: sites[site].kind,
            site,
            seed,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog(src: &str) -> MiniProgram {
        MiniProgram {
            name: "p".into(),
            source: src.into(),
        }
    }

    #[test]
    fn arithmetic_substitution() {
        let p = prog("s = s + x;");
        let m = mutate(
            &p,
            &MutationOp {
                kind: MutationKind::Arithmetic,
                site: 0,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(m.source, "s = s - x;");
    }

    #[test]
    fn relational_substitution_changes_length() {
        let p = prog("while (i < n) { i = i + 1; }");
        let m = mutate(
            &p,
            &MutationOp {
                kind: MutationKind::Relational,
                site: 0,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(m.source, "while (i <= n) { i = i + 1; }");
        let m = mutate(
            &m,
            &MutationOp {
                kind: MutationKind::Relational,
                site: 0,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(m.source, p.source);
    }

    #[test]
    fn no_operator_is_an_error() {
        let p = prog("x = y;");
        let err = mutate(
            &p,
            &MutationOp {
                kind: MutationKind::Arithmetic,
                site: 0,
                seed: 0,
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("mutable sites: none"), "{err}");
        assert!(sample_mutations(&p, 1, 7).is_err());
        assert!(sample_mutations(&p, 0, 7).unwrap().is_empty());
    }

    #[test]
    fn wrong_kind_lists_sites() {
        let p = prog("x = a & b;");
        let err = mutate(
            &p,
            &MutationOp {
                kind: MutationKind::Arithmetic,
                site: 0,
                seed: 0,
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("0:&(Bitwise)"), "{err}");
    }

    #[test]
    fn modulo_and_xor_are_not_mutable() {
        let p = prog("x = a % b ^ c;");
        assert!(mutable_sites(&p).unwrap().is_empty());
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let p = prog("x = a + b - c * d / e;");
        let a = sample_mutations(&p, 4, 3).unwrap();
        assert_eq!(a, sample_mutations(&p, 4, 3).unwrap());
        let mut sites: Vec<usize> = a.iter().map(|m| m.site).collect();
        sites.sort_unstable();
        assert_eq!(sites, vec![0, 1, 2, 3]);
        assert_eq!(sample_mutations(&p, 6, 3).unwrap().len(), 6);
    }
}
