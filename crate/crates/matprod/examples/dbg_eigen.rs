use matprod::mat::Mat;
fn main() {
    let m = Mat::from_rows(vec![
        vec![0.5, 1.2, -0.3, 0.0, 0.7],
        vec![0.1, -0.4, 0.9, 0.2, 0.0],
        vec![0.0, 0.3, 1.1, -0.5, 0.4],
        vec![0.8, 0.0, 0.2, 0.6, -0.1],
        vec![-0.2, 0.5, 0.0, 0.3, 0.9],
    ]);
    let mut vals = matprod::eigen::eigenvalues(&m).unwrap();
    vals.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    for v in vals { println!("lambda = {v}"); }
}
