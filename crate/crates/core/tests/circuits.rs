use qrl_core::oracles::dense_simulate;
use qrl_core::{Circuit, Gate};

const CORPUS: &str = "\
# twenty gates over four qubits
qubits 4
h 0
cx 0 1
s 1
cx 1 2
swap 2 3
h 3
cx 3 2
s 0
s 0
cx 0 1

h 2
swap 0 1
cx 2 3
s 3
h 1
cx 1 0
swap 1 2
h 0
cx 0 3   # trailing comment
s 2
";

#[test]
fn corpus_round_trips() {
    let c = Circuit::parse(CORPUS).unwrap();
    assert_eq!(c.n_qubits(), 4);
    assert_eq!(c.len(), 20);
    assert_eq!(c.gates()[0], Gate::H(0));
    assert_eq!(c.gates()[4], Gate::Swap(2, 3));
    let text = c.emit();
    let back = Circuit::parse(&text).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.emit(), text);
    let u = dense_simulate(&c).unwrap();
    assert!(u.approx_eq(&dense_simulate(&back).unwrap(), 0.0));
}

#[test]
fn corpus_metrics_match_hand_counts() {
    let c = Circuit::parse(CORPUS).unwrap();
    // 7 cx + 3 swap
    assert_eq!(c.count2q(), 10);
    // per-qubit 2q layer walk:
    // cx01:1 cx12:2 sw23:3 cx32:4 cx01:3 sw01:4 cx23:5 cx10:5 sw12:6 cx03:6
    assert_eq!(c.depth2q(), 6);
}

#[test]
fn malformed_lines_report_position() {
    let bad = CORPUS.replace("cx 1 2\n", "cx 1 1\n");
    let err = Circuit::parse(&bad).unwrap_err().to_string();
    assert!(err.starts_with("line 6"), "{err}");
    let bad = CORPUS.replace("h 3\n", "t 3\n");
    let err = Circuit::parse(&bad).unwrap_err().to_string();
    assert!(err.starts_with("line 8"), "{err}");
    assert!(Circuit::parse("h 0\n").is_err());
    assert!(Circuit::parse("qubits 2\ncx 0 2\n").is_err());
}
