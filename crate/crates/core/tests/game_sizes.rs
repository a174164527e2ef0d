use tmecor::game::{build_kuhn, build_leduc, validate_game, GameTree};

fn sizes(g: &GameTree<f64>) -> (usize, Vec<usize>) {
    (g.num_leaves(), (0..3).map(|p| g.num_sequences(p)).collect())
}

#[test]
fn kuhn_sizes_match_published_table() {
    for (ranks, leaves, seqs) in [(4, 312, 33), (6, 1560, 49), (8, 4368, 65), (10, 9360, 81), (12, 17160, 97)] {
        let g: GameTree<f64> = build_kuhn(3, ranks).unwrap();
        assert_eq!(sizes(&g), (leaves, vec![seqs; 3]), "3K{ranks}");
        assert!(validate_game(&g).is_valid());
    }
}

#[test]
fn leduc_three_ranks_matches_published_table() {
    let g: GameTree<f64> = build_leduc(3, 3).unwrap();
    assert_eq!(sizes(&g), (249_480, vec![457; 3]));
    assert!(validate_game(&g).is_valid());
    assert_eq!(g.utility_range(), 21.0);
}

#[test]
#[ignore = "builds ~1e6 leaves; run with --ignored"]
fn leduc_four_ranks_sequence_count() {
    let g: GameTree<f64> = build_leduc(3, 4).unwrap();
    assert_eq!(g.num_sequences(0), 801);
}
