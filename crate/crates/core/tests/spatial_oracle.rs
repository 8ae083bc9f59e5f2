mod common;

use common::*;
use proptest::prelude::*;
use regscore::geom::Point3;
use regscore::spatial::NeighborIndex;

#[test]
fn nearest_and_knn_match_linear_scan() {
    let mut r = rng(21);
    let cloud = random_cloud(&mut r, 1000, 10.0);
    let index = NeighborIndex::build(&cloud).unwrap();
    for _ in 0..100 {
        let q = random_point(&mut r, 12.0);
        let hit = index.nearest(&q);
        assert_eq!((hit.index, hit.distance), scan_nearest(cloud.points(), &q));
        for k in [1, 2, 7, 50] {
            let got: Vec<_> = index.knn(&q, k).unwrap().iter().map(|h| (h.index, h.distance)).collect();
            assert_eq!(got, scan_knn(cloud.points(), &q, k));
        }
    }
    let q = Point3::new(0.0, 0.0, 0.0);
    let got: Vec<_> = index.knn(&q, 1000).unwrap().iter().map(|h| (h.index, h.distance)).collect();
    assert_eq!(got, scan_knn(cloud.points(), &q, 1000));
}

#[test]
fn lattice_ties_go_to_lowest_index() {
    // integer lattice queries at cell centers produce many exact ties
    let pts: Vec<_> = (0..512).map(|i| Point3::new((i % 8) as f64, ((i / 8) % 8) as f64, (i / 64) as f64)).collect();
    let index = NeighborIndex::from_points(pts.clone()).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            let q = Point3::new(i as f64 + 0.5, j as f64 + 0.5, 3.5);
            assert_eq!(index.nearest(&q).index, scan_nearest(&pts, &q).0);
            let got: Vec<_> = index.knn(&q, 12).unwrap().iter().map(|h| h.index).collect();
            let want: Vec<_> = scan_knn(&pts, &q, 12).iter().map(|h| h.0).collect();
            assert_eq!(got, want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_sorted_unique_and_equal_to_scan(
        coords in prop::collection::vec((-50i32..50, -50i32..50, -50i32..50), 1..400),
        q in (-60i32..60, -60i32..60, -60i32..60),
        k_seed in 1usize..64,
    ) {
        let pts: Vec<_> = coords.iter().map(|&(x, y, z)| Point3::new(x as f64 * 0.5, y as f64, z as f64 * 0.25)).collect();
        let index = NeighborIndex::from_points(pts.clone()).unwrap();
        let q = Point3::new(q.0 as f64 * 0.5, q.1 as f64, q.2 as f64 * 0.25);
        let k = 1 + (k_seed - 1) % pts.len();
        let hits = index.knn(&q, k).unwrap();
        prop_assert!(hits.windows(2).all(|w| w[0].distance <= w[1].distance));
        let mut ids: Vec<_> = hits.iter().map(|h| h.index).collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), k);
        let got: Vec<_> = hits.iter().map(|h| (h.index, h.distance)).collect();
        prop_assert_eq!(got, scan_knn(&pts, &q, k));
        let n = index.nearest(&q);
        prop_assert_eq!((n.index, n.distance), scan_nearest(&pts, &q));
    }
}
