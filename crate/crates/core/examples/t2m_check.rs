use graded_conn::algebroid::{check_structure, AlgebroidSpec};
use graded_conn::chart::graded_bundle_chart;
use graded_conn::constructions::*;

fn main() {
    let base = graded_bundle_chart("M", &["x1", "x2"], &[]).unwrap();
    let spec = AlgebroidSpec::tangent(&base).unwrap();
    let (_, v) = check_structure(&spec).unwrap();
    let alg = v.unwrap();
    let gamma = AffineConnectionData::generic(&base, "Gm").unwrap();
    let block = TangentBlock::from_affine(&gamma).unwrap();
    let built = canonical_t2m_connection(&alg, &gamma, &block).unwrap();
    let displayed = displayed_t2m_connection(&alg, &gamma, &block).unwrap();
    println!("construction == displayed formulas: {}", built.equals(&displayed));
    let rep = t2m_curvature_check(&alg, &gamma, &built).unwrap();
    println!("{}", rep.render_text());
}
