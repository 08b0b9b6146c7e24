use super::{PauliString, StabilizerCode};
use crate::circuit::Axis;
use crate::{Error, Result};

/// Unrotated toric code on a `d × d` torus.
///
/// Qubits sit on edges: the horizontal edge leaving vertex `(i, j)` is qubit
/// `2(i·d + j)`, the vertical one `2(i·d + j) + 1`. Stabilizers are the `d²`
/// vertex X-checks followed by the `d²` plaquette Z-checks.
pub fn build_toric(d: usize) -> Result<StabilizerCode> {
    if d < 2 {
        return Err(Error::CodeParams(format!("toric distance must be at least 2, got {d}")));
    }
    let h = |i: usize, j: usize| 2 * ((i % d) * d + (j % d));
    let v = |i: usize, j: usize| 2 * ((i % d) * d + (j % d)) + 1;
    let mut stabilizers = Vec::with_capacity(2 * d * d);
    for i in 0..d {
        for j in 0..d {
            stabilizers.push(PauliString::uniform(
                Axis::X,
                [h(i, j), h(i, j + d - 1), v(i, j), v(i + d - 1, j)],
            ));
        }
    }
    for i in 0..d {
        for j in 0..d {
            stabilizers.push(PauliString::uniform(
                Axis::Z,
                [h(i, j), h(i + 1, j), v(i, j), v(i, j + 1)],
            ));
        }
    }
    let logical_z = vec![
        PauliString::uniform(Axis::Z, (0..d).map(|j| h(0, j))),
        PauliString::uniform(Axis::Z, (0..d).map(|i| v(i, 0))),
    ];
    let logical_x = vec![
        PauliString::uniform(Axis::X, (0..d).map(|i| h(i, 0))),
        PauliString::uniform(Axis::X, (0..d).map(|j| v(0, j))),
    ];
    Ok(StabilizerCode {
        name: format!("toric-d{d}"),
        n: 2 * d * d,
        stabilizers,
        logical_x,
        logical_z,
        k: 2,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_distances_are_valid() {
        for d in 2..=6 {
            let c = build_toric(d).unwrap();
            assert_eq!(c.n, 2 * d * d);
            assert_eq!(c.stabilizers.len(), 2 * d * d);
            assert!(c.check().is_empty(), "d={d}: {:?}", c.check());
        }
    }

    #[test]
    fn rejects_tiny() {
        assert!(build_toric(1).is_err());
    }
}
