//! Multiplayer Leduc hold'em.

use super::kuhn::{betting, ordered_deals, rank_name, BettingRound, Table};
use super::{GameBuilder, GameTree, Link};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SUITS: usize = 3;
const PREFLOP_BET: u64 = 2;
const FLOP_BET: u64 = 4;

/// Builds `n`-player Leduc hold'em over `3 * ranks` cards.
///
/// Ante one chip, one private card each, a preflop round (bet two chips),
/// one public card, a flop round (bet four chips), then showdown: pairing the
/// public card wins, otherwise the highest rank; ties split the pot.
/// Information sets only see ranks, while nodes keep individual cards.
pub fn build_leduc<T: Scalar>(n_players: usize, ranks: usize) -> Result<GameTree<T>> {
    if n_players < 3 {
        return Err(Error::InvalidParams(format!(
            "leduc needs at least 3 players, got {n_players}"
        )));
    }
    if ranks == 0 || SUITS * ranks < n_players + 1 {
        return Err(Error::InvalidParams(format!(
            "leduc deck of {} cards too small for {n_players} players",
            SUITS * ranks
        )));
    }
    let deck = SUITS * ranks;
    let deals = ordered_deals(deck, n_players);
    let mut b = GameBuilder::with_capacity(n_players, deals.len() * 600);
    let root = b.chance(Link::Root)?;
    let deal_prob = T::one() / T::from_count(deals.len());
    let board_prob = T::one() / T::from_count(deck - n_players);
    let names: Vec<String> = (0..ranks).map(|r| rank_name(r, ranks)).collect();
    let rank = |card: usize| card / SUITS;

    for cards in deals {
        let hole: Vec<String> = cards.iter().map(|&c| names[rank(c)].clone()).collect();
        let mut table = Table::new(n_players, 1);
        let mut round = BettingRound::new(&table, PREFLOP_BET);
        let mut hist = String::new();
        let preflop_label = |p: usize, h: &str| format!("{}:/{}:", hole[p], h);
        betting(
            &mut b,
            Link::Outcome(root, deal_prob),
            &mut table,
            &mut round,
            &mut hist,
            &preflop_label,
            &mut |b, link, table, pre| {
                if table.num_active() < 2 {
                    return b.terminal(link, table.team_payoff::<T>(&vec![0; n_players]));
                }
                let node = b.chance(link)?;
                for board in (0..deck).filter(|c| !cards.contains(c)) {
                    let board_rank = rank(board);
                    let strength: Vec<usize> = cards
                        .iter()
                        .map(|&c| {
                            if rank(c) == board_rank {
                                ranks + rank(c)
                            } else {
                                rank(c)
                            }
                        })
                        .collect();
                    let mut flop_table = table.clone();
                    let mut flop = BettingRound::new(&flop_table, FLOP_BET);
                    let mut flop_hist = String::new();
                    let flop_label = |p: usize, h: &str| {
                        format!("{}|{}:/{}/{}:", hole[p], names[board_rank], pre, h)
                    };
                    betting(
                        b,
                        Link::Outcome(node, board_prob),
                        &mut flop_table,
                        &mut flop,
                        &mut flop_hist,
                        &flop_label,
                        &mut |b, link, table, _| {
                            b.terminal(link, table.team_payoff::<T>(&strength))
                        },
                    )?;
                }
                Ok(node)
            },
        )?;
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate_game;

    #[test]
    fn deck_too_small() {
        assert!(build_leduc::<f64>(4, 1).is_err());
        assert!(build_leduc::<f64>(2, 3).is_err());
    }

    #[test]
    fn three_player_two_rank_structure() {
        let g: GameTree<f64> = build_leduc(3, 2).unwrap();
        // 6*5*4 deals; 3 preflop fold-outs plus 3 boards times the flop lines.
        assert_eq!(g.num_leaves(), 120 * (3 + 3 * (4 * 13 + 6 * 5)));
        // per rank: 4 preflop sets, 2 boards * (4*4 + 4*2) flop sets
        for p in 0..3 {
            assert_eq!(g.num_sequences(p), 1 + 2 * 2 * (4 + 2 * 24));
        }
        assert!(validate_game(&g).is_valid());
        assert_eq!(g.utility_range(), 21.0);
    }
}
