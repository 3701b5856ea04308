//! Runs exported OpenQASM through a small independent interpreter and
//! checks it against the circuit it came from.

use num_complex::Complex64 as C;

use steadybench::circuit::{build_random_circuit_with, circuit_to_channel, AncillaStrategy, CircuitIR};
use steadybench::linalg::{DensityMatrix, Matrix};
use steadybench::qasm::{export_qasm, phase_distance};
use steadybench::rng::RngStream;

enum Op {
    U(usize, [[C; 2]; 2]),
    Cx(usize, usize),
    Reset(usize),
}

struct Program {
    n_qubits: usize,
    ops: Vec<Op>,
    /// Physical qubit read into `c[k]`.
    outputs: Vec<usize>,
}

fn qubit(token: &str) -> usize {
    let inner = token
        .trim()
        .trim_end_matches(';')
        .trim_start_matches("q[")
        .trim_end_matches(']');
    inner.parse().unwrap_or_else(|_| panic!("bad qubit operand {token:?}"))
}

/// `U(theta, phi, lambda)` in the OpenQASM 3 convention.
fn u3(theta: f64, phi: f64, lambda: f64) -> [[C; 2]; 2] {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    [
        [C::new(c, 0.0), -C::from_polar(s, lambda)],
        [C::from_polar(s, phi), C::from_polar(c, phi + lambda)],
    ]
}

fn parse(src: &str) -> Program {
    let mut p = Program {
        n_qubits: 0,
        ops: Vec::new(),
        outputs: Vec::new(),
    };
    for line in src.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with("//")) {
        if let Some(rest) = line.strip_prefix("qubit[") {
            p.n_qubits = rest.split(']').next().unwrap().parse().unwrap();
        } else if let Some(rest) = line.strip_prefix("U(") {
            let (args, target) = rest.split_once(')').unwrap();
            let a: Vec<f64> = args.split(',').map(|x| x.trim().parse().unwrap()).collect();
            p.ops.push(Op::U(qubit(target), u3(a[0], a[1], a[2])));
        } else if let Some(rest) = line.strip_prefix("cx ") {
            let (a, b) = rest.split_once(',').unwrap();
            p.ops.push(Op::Cx(qubit(a), qubit(b)));
        } else if let Some(rest) = line.strip_prefix("reset ") {
            p.ops.push(Op::Reset(qubit(rest)));
        } else if line.starts_with("c[") {
            p.outputs.push(qubit(line.split("measure").nth(1).unwrap()));
        } else if line.starts_with("anc[") {
            // The outcome is discarded and the qubit reset next, so the
            // measurement itself does not change the averaged state.
        } else {
            assert!(
                line.starts_with("OPENQASM") || line.starts_with("include") || line.starts_with("bit["),
                "unexpected line {line:?}"
            );
        }
    }
    p
}

/// Dense density-matrix evolution, qubit `k` on bit `k` of the index.
struct Dm {
    dim: usize,
    m: Vec<C>,
}

impl Dm {
    fn zero(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut m = vec![C::new(0.0, 0.0); dim * dim];
        m[0] = C::new(1.0, 0.0);
        Dm { dim, m }
    }

    fn at(&self, i: usize, j: usize) -> C {
        self.m[i * self.dim + j]
    }

    /// `rho -> A rho A^dagger` for `A` given by its action on basis states.
    fn conjugate(&mut self, column: impl Fn(usize) -> Vec<(usize, C)>) {
        let d = self.dim;
        let mut left = vec![C::new(0.0, 0.0); d * d];
        for j in 0..d {
            for (i, a) in column(j) {
                for k in 0..d {
                    left[i * d + k] += a * self.at(j, k);
                }
            }
        }
        let mut out = vec![C::new(0.0, 0.0); d * d];
        for j in 0..d {
            for (i, a) in column(j) {
                for r in 0..d {
                    out[r * d + i] += left[r * d + j] * a.conj();
                }
            }
        }
        self.m = out;
    }

    fn apply(&mut self, op: &Op) {
        match *op {
            Op::U(q, u) => self.conjugate(|j| {
                let b = (j >> q) & 1;
                let base = j & !(1 << q);
                vec![(base, u[0][b]), (base | 1 << q, u[1][b])]
            }),
            Op::Cx(c, t) => self.conjugate(|j| vec![(if (j >> c) & 1 == 1 { j ^ (1 << t) } else { j }, C::new(1.0, 0.0))]),
            Op::Reset(q) => {
                let d = self.dim;
                let mut out = vec![C::new(0.0, 0.0); d * d];
                for i in (0..d).filter(|i| (i >> q) & 1 == 0) {
                    for j in (0..d).filter(|j| (j >> q) & 1 == 0) {
                        out[i * d + j] = self.at(i, j) + self.at(i | 1 << q, j | 1 << q);
                    }
                }
                self.m = out;
            }
        }
    }
}

fn output_distribution(c: &CircuitIR, reps: usize) -> Vec<f64> {
    let p = parse(&export_qasm(c, reps, Some(1)).unwrap().source);
    let mut rho = Dm::zero(p.n_qubits);
    for op in &p.ops {
        rho.apply(op);
    }
    let mut probs = vec![0.0; 1 << p.outputs.len()];
    for i in 0..rho.dim {
        let outcome = p.outputs.iter().enumerate().map(|(k, &q)| ((i >> q) & 1) << k).sum::<usize>();
        probs[outcome] += rho.at(i, i).re;
    }
    probs
}

#[test]
fn one_repetition_is_the_circuit_unitary() {
    for seed in 0..5 {
        let c = build_random_circuit_with(2, 1, 3, AncillaStrategy::Reuse, &mut RngStream::new(401, seed)).unwrap();
        let p = parse(&export_qasm(&c, 1, None).unwrap().source);
        let dim = 1 << p.n_qubits;
        let gates: Vec<&Op> = p.ops.iter().filter(|op| !matches!(op, Op::Reset(_))).collect();
        // Evolve each basis vector as a pure state.
        let mut u = Matrix::<f64>::zeros(dim, dim);
        for col in 0..dim {
            let mut psi = vec![C::new(0.0, 0.0); dim];
            psi[col] = C::new(1.0, 0.0);
            for op in &gates {
                let mut next = vec![C::new(0.0, 0.0); dim];
                for (j, a) in psi.iter().enumerate() {
                    match **op {
                        Op::U(q, g) => {
                            let (b, base) = ((j >> q) & 1, j & !(1 << q));
                            next[base] += g[0][b] * a;
                            next[base | 1 << q] += g[1][b] * a;
                        }
                        Op::Cx(ctl, t) => next[if (j >> ctl) & 1 == 1 { j ^ (1 << t) } else { j }] += a,
                        Op::Reset(_) => unreachable!(),
                    }
                }
                psi = next;
            }
            u.set_column(col, &psi);
        }
        assert!(phase_distance(&u, &c.unitary()) <= 1e-8);
    }
}

#[test]
fn repeated_program_matches_iterated_channel() {
    for (strategy, n_anc) in [
        (AncillaStrategy::Reuse, 1),
        (AncillaStrategy::Reuse, 2),
        (AncillaStrategy::Fresh, 1),
    ] {
        let c = build_random_circuit_with(2, n_anc, 2, strategy, &mut RngStream::new(402, n_anc as u64)).unwrap();
        let reps = 3;
        let expected = circuit_to_channel(&c, None)
            .unwrap()
            .iterate(&DensityMatrix::basis(4, 0), reps)
            .unwrap()
            .probabilities();
        let got = output_distribution(&c, reps);
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-9, "{strategy:?}: {got:?} vs {expected:?}");
        }
    }
}
