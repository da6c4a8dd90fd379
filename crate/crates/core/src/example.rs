use crate::linalg::CMat;
use crate::operator::{Ambient, RankOne, StructuredOperator};
use crate::scalar::{cx, real, Cx};
use crate::sequence::TailSequence;
use crate::vector::HVector;

/// The reference operator on `l^2` with orthonormal basis `u_j`:
///
/// ```text
/// u_1 -> (1+i) u_1 + u_2 + u_4
/// u_2 -> 2 u_1 + (5-3i) u_3
/// u_3 -> u_1 - 2 u_2 + 3 u_3 - 2 u_4
/// u_4 -> 0
/// u_j -> j^-2 u_4            (j >= 5)
/// ```
///
/// Index 2, three-dimensional core, trace `4+i`.
pub fn worked_example() -> StructuredOperator {
    let z = real(0.0);
    let columns: [[Cx; 4]; 4] = [
        [cx(1.0, 1.0), real(1.0), z, real(1.0)],
        [real(2.0), z, cx(5.0, -3.0), z],
        [real(1.0), real(-2.0), real(3.0), real(-2.0)],
        [z, z, z, z],
    ];
    let block = CMat::from_fn(4, 4, |i, j| columns[j][i]);
    let tail = RankOne::new(
        HVector::basis(4),
        HVector::from_tail(TailSequence::power(real(1.0), 2.0, 5)),
    );
    StructuredOperator::new(Ambient::Infinite, 4, block, vec![tail])
        .expect("reference operator is valid")
}
