use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_supercluster"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn planted(dir: &Path) {
    let o = run(&["synth", "--out", "fx", "--seed", "7"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

const MATRIX: [&str; 6] = [
    "--input",
    "fx/matrix.csv",
    "--input-kind",
    "matrix",
    "--labels",
    "fx/labels.csv",
];

#[test]
fn spectral_cluster_recovers_blocks() {
    let tmp = tempfile::tempdir().unwrap();
    planted(tmp.path());
    let mut args = vec!["cluster"];
    args.extend(MATRIX);
    args.extend(["--method", "spectral", "--n", "4", "--egn", "6", "--seed", "3"]);
    let o = run(&args, tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let clusters: Vec<usize> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(clusters.len(), 100);
    for block in clusters.chunks(25) {
        assert!(block.iter().all(|&c| c == block[0]));
    }
    let mut firsts: Vec<usize> = clusters.chunks(25).map(|b| b[0]).collect();
    firsts.sort();
    assert_eq!(firsts, [0, 1, 2, 3]);
}

#[test]
fn score_of_pure_assignment_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = "id,label,v0,v1\na,1,1,0\nb,1,0.9,0.1\nc,2,0,1\nd,2,0.1,0.9\n";
    fs::write(tmp.path().join("corpus.csv"), corpus).unwrap();
    fs::write(tmp.path().join("a.csv"), "node_index,cluster\n0,0\n1,0\n2,1\n3,1\n").unwrap();
    let o = run(
        &["score", "--assignment", "a.csv", "--labels", "corpus.csv"],
        tmp.path(),
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o), "entropy_sum 0\nbalanced_score 0\n");

    fs::write(tmp.path().join("b.csv"), "node_index,cluster\n0,0\n1,1\n2,0\n3,1\n").unwrap();
    let o = run(
        &[
            "score",
            "--assignment",
            "b.csv",
            "--labels",
            "corpus.csv",
            "--log-base",
            "2",
        ],
        tmp.path(),
    );
    assert_eq!(stdout(&o), "entropy_sum 2\nbalanced_score 0\n");
}

#[test]
fn run_writes_report_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    planted(tmp.path());
    let mut base = vec!["run"];
    base.extend(MATRIX);
    base.extend([
        "--method",
        "louvain",
        "--method",
        "kmeans:k=4",
        "--method",
        "spectral:n=4,egn=6",
        "--trials",
        "3",
        "--seed",
        "42",
    ]);
    for (out, workers) in [("r1", "1"), ("r2", "4")] {
        let mut args = base.clone();
        args.extend(["--out", out, "--workers", workers]);
        let o = run(&args, tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(tmp.path().join("r1/scores.csv")).unwrap();
    let b = fs::read(tmp.path().join("r2/scores.csv")).unwrap();
    assert_eq!(a, b);
    let lines = String::from_utf8(a).unwrap();
    assert_eq!(lines.lines().count(), 10);
    for name in [
        "report.json",
        "grid_louvain.csv",
        "grid_spectral-n4-egn6.csv",
        "assignment_kmeans-k4_2.csv",
    ] {
        assert!(tmp.path().join("r1").join(name).exists(), "{name}");
    }

    let o = run(&["report", "--results", "r1", "--out", "again"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(tmp.path().join("again/scores.csv")).unwrap(),
        fs::read(tmp.path().join("r1/scores.csv")).unwrap()
    );
}

#[test]
fn similarity_and_spectrum_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = "id,label,v0,v1\na,1,1,2\nb,1,2,4\nc,2,-1,0.5\n";
    fs::write(tmp.path().join("corpus.csv"), corpus).unwrap();
    let o = run(&["similarity", "--input", "corpus.csv", "--out", "s.csv"], tmp.path());
    assert!(o.status.success());
    let s = fs::read_to_string(tmp.path().join("s.csv")).unwrap();
    let first: Vec<f64> = s
        .lines()
        .next()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(first, [0.0, 1.0, 0.0]);

    let o = run(
        &[
            "cluster",
            "--input",
            "corpus.csv",
            "--method",
            "spectral:n=2,egn=1",
            "--no-threshold",
            "--out",
            "a.csv",
            "--dump-spectrum",
            "spec",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let eig = fs::read_to_string(tmp.path().join("spec/eigenvalues.csv")).unwrap();
    assert_eq!(eig.lines().count(), 4);
    assert!(tmp.path().join("spec/embedding.csv").exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    planted(tmp.path());

    let o = run(&["run", "--bogus"], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    let o = run(
        &[
            "run",
            "--input",
            "fx/matrix.csv",
            "--input-kind",
            "matrix",
            "--method",
            "louvain",
            "--out",
            "x",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2), "missing --labels is a usage error");

    let mut args = vec!["run"];
    args.extend(MATRIX);
    args.extend(["--method", "kmeans", "--out", "x"]);
    assert_eq!(run(&args, tmp.path()).status.code(), Some(2), "kmeans without k");

    let o = run(
        &["run", "--input", "missing.csv", "--method", "louvain", "--out", "x"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));

    // one method fails every trial: report still written, status nonzero
    let mut args = vec!["run"];
    args.extend(MATRIX);
    args.extend([
        "--method",
        "louvain",
        "--method",
        "kmeans:k=500",
        "--trials",
        "2",
        "--out",
        "partial",
    ]);
    let o = run(&args, tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(tmp.path().join("partial/report.json").exists());

    let o = run(&["--help"], tmp.path());
    assert!(o.status.success());
    for sub in ["run", "similarity", "cluster", "score", "report"] {
        assert!(stdout(&o).contains(sub));
    }
}
