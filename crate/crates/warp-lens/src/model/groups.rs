//! Substitution groups: numeric operators keyed by their stack signature.
//! Two operators are interchangeable under Rule 2 iff they share a group.

use super::instr::{NumericOp, OperatorType};

/// All core numeric operators whose signature equals `sig`, in opcode order.
/// Empty for signatures outside the numeric set.
pub fn substitution_group(sig: &OperatorType) -> Vec<NumericOp> {
    NumericOp::ALL
        .iter()
        .copied()
        .filter(|op| op.signature() == *sig)
        .collect()
}

/// Rule 2 candidates for `op`: the rest of its group.
pub fn substitution_candidates(op: NumericOp) -> Vec<NumericOp> {
    substitution_group(&op.signature())
        .into_iter()
        .filter(|other| *other != op)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DataType;

    #[test]
    fn i64_binop_group() {
        let sig = OperatorType::new(&[DataType::I64, DataType::I64], &[DataType::I64]);
        let group = substitution_group(&sig);
        let names: Vec<&str> = group.iter().map(|op| op.name()).collect();
        assert_eq!(group.len(), 15);
        assert!(names.contains(&"i64.add"));
        assert!(names.contains(&"i64.sub"));
        assert!(names.contains(&"i64.mul"));
        assert!(names.contains(&"i64.div_s"));
        assert!(names.contains(&"i64.div_u"));
        // Deterministic opcode order.
        assert_eq!(names[0], "i64.add");
        assert_eq!(*names.last().unwrap(), "i64.rotr");
    }

    #[test]
    fn i64_comparison_group() {
        let sig = OperatorType::new(&[DataType::I64, DataType::I64], &[DataType::I32]);
        let names: Vec<&str> = substitution_group(&sig)
            .iter()
            .map(|op| op.name())
            .collect();
        assert_eq!(
            names,
            vec![
                "i64.eq", "i64.ne", "i64.lt_s", "i64.lt_u", "i64.gt_s", "i64.gt_u", "i64.le_s",
                "i64.le_u", "i64.ge_s", "i64.ge_u"
            ]
        );
    }

    #[test]
    fn singleton_groups_have_no_candidates() {
        assert!(substitution_candidates(NumericOp::F32DemoteF64).is_empty());
        assert!(substitution_candidates(NumericOp::F64PromoteF32).is_empty());
    }

    #[test]
    fn unknown_signature_is_empty() {
        // A shape no numeric op has.
        let sig = OperatorType::new(&[DataType::F32, DataType::I64], &[DataType::F64]);
        assert!(substitution_group(&sig).is_empty());
    }

    #[test]
    fn division_replacement_includes_subtraction() {
        let cands = substitution_candidates(NumericOp::I64DivU);
        assert!(cands.contains(&NumericOp::I64Sub));
        assert!(!cands.contains(&NumericOp::I64DivU));
    }
}
