//! Diffuse functionality: Δ-delayed broadcast into per-party RECEIVE strings.

use std::collections::VecDeque;

use crate::chain::BlockRef;
use crate::error::{Error, Result};
use crate::model::{PartyId, PartySet, Sender, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub sent_round: u64,
    pub sender: Sender,
    pub payload: BlockRef,
}

/// Messages written at the end of a round, in delivery order, and the parties
/// whose RECEIVE strings got them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Delivery {
    pub payloads: Vec<BlockRef>,
    pub recipients: PartySet,
}

impl Delivery {
    pub fn for_party(&self, party: PartyId) -> &[BlockRef] {
        if self.recipients.contains(party) {
            &self.payloads
        } else {
            &[]
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiffuseState {
    round: u64,
    delta: u32,
    b_flag: bool,
    t: u32,
    pending: VecDeque<Message>,
    receive: Vec<Vec<BlockRef>>,
    completed: Vec<bool>,
    adversary_complete: bool,
}

impl DiffuseState {
    pub fn new(n: u32, t: u32, delta: u32, b_flag: bool) -> Self {
        DiffuseState {
            round: 1,
            delta,
            b_flag,
            t,
            pending: VecDeque::new(),
            receive: vec![Vec::new(); n as usize],
            completed: vec![false; n as usize],
            adversary_complete: false,
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Sends a (possibly empty) message. An honest party may send once per
    /// round and is then complete; the adversary may send any number of
    /// messages until it marks itself complete.
    pub fn send(&mut self, sender: Sender, payload: Option<BlockRef>) -> Result<()> {
        match sender {
            Sender::Party(i) => {
                if i < self.t {
                    return Err(Error::Protocol(format!("corrupted P{} sends through the adversary", i + 1)));
                }
                let done = self
                    .completed
                    .get_mut(i as usize)
                    .ok_or_else(|| Error::Protocol(format!("no party P{}", i + 1)))?;
                if *done {
                    return Err(Error::Protocol(format!("P{} already sent in round {}", i + 1, self.round)));
                }
                *done = true;
            }
            Sender::Adversary => {
                if self.adversary_complete {
                    return Err(Error::Protocol(format!("adversary already complete in round {}", self.round)));
                }
            }
        }
        if let Some(payload) = payload {
            self.pending.push_back(Message { sent_round: self.round, sender, payload });
        }
        Ok(())
    }

    pub fn mark_adversary_complete(&mut self) {
        self.adversary_complete = true;
    }

    /// Messages sent so far in the current round, in sending order.
    pub fn adversary_peek(&self) -> Vec<(Sender, BlockRef)> {
        self.pending
            .iter()
            .rev()
            .take_while(|m| m.sent_round == self.round)
            .map(|m| (m.sender, m.payload))
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect()
    }

    /// Messages sent in earlier rounds and not yet written anywhere.
    pub fn in_flight(&self) -> impl Iterator<Item = &Message> {
        self.pending.iter().filter(move |m| m.sent_round < self.round)
    }

    pub fn receive(&self, party: PartyId) -> &[BlockRef] {
        &self.receive[party as usize]
    }

    /// Reads and clears a party's RECEIVE string.
    pub fn take_receive(&mut self, party: PartyId) -> Vec<BlockRef> {
        std::mem::take(&mut self.receive[party as usize])
    }

    /// Closes the round: writes every message that is Δ rounds old to the
    /// eligible parties (all honest parties when B = 1, only the alert ones
    /// when B = 0) and advances the round counter.
    pub fn end_round(&mut self, statuses: &[Status]) -> Result<Delivery> {
        for (i, status) in statuses.iter().enumerate() {
            if *status == Status::Alert && !self.completed[i] {
                return Err(Error::Protocol(format!("P{} has not completed round {}", i + 1, self.round)));
            }
        }
        if !self.adversary_complete {
            return Err(Error::Protocol(format!("adversary has not completed round {}", self.round)));
        }

        let mut delivery = Delivery::default();
        while self.pending.front().is_some_and(|m| self.round - m.sent_round >= self.delta as u64) {
            delivery.payloads.push(self.pending.pop_front().unwrap().payload);
        }
        // Corrupted parties are skipped: the adversary reads everything through peek.
        delivery.recipients = statuses
            .iter()
            .enumerate()
            .filter(|(_, s)| match s {
                Status::Alert => true,
                Status::Sleepy => self.b_flag,
                Status::Corrupted => false,
            })
            .map(|(i, _)| i as PartyId)
            .collect();
        if !delivery.payloads.is_empty() {
            for party in delivery.recipients.iter() {
                self.receive[party as usize].extend_from_slice(&delivery.payloads);
            }
        }

        self.round += 1;
        self.completed.iter_mut().for_each(|c| *c = false);
        self.adversary_complete = false;
        Ok(delivery)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Status::*;

    fn finish(d: &mut DiffuseState, statuses: &[Status]) -> Delivery {
        for (i, s) in statuses.iter().enumerate() {
            if *s == Alert && !d.completed[i] {
                d.send(Sender::Party(i as u32), None).unwrap();
            }
        }
        d.mark_adversary_complete();
        d.end_round(statuses).unwrap()
    }

    #[test]
    fn synchronous_delivery_same_round() {
        let st = [Alert, Alert, Alert];
        let mut d = DiffuseState::new(3, 0, 0, true);
        d.send(Sender::Party(0), Some(BlockRef(1))).unwrap();
        d.send(Sender::Party(2), Some(BlockRef(2))).unwrap();
        let del = finish(&mut d, &st);
        for p in 0..3 {
            assert_eq!(del.for_party(p), &[BlockRef(1), BlockRef(2)]);
            assert_eq!(d.receive(p), &[BlockRef(1), BlockRef(2)]);
        }
    }

    #[test]
    fn delta_two_delivers_two_rounds_later() {
        let st = [Alert, Alert];
        let mut d = DiffuseState::new(2, 0, 2, true);
        d.send(Sender::Party(0), Some(BlockRef(5))).unwrap();
        assert!(finish(&mut d, &st).payloads.is_empty()); // end of r
        assert!(finish(&mut d, &st).payloads.is_empty()); // end of r+1
        assert_eq!(finish(&mut d, &st).payloads, vec![BlockRef(5)]); // end of r+2
    }

    #[test]
    fn empty_send_completes_without_enqueueing() {
        let mut d = DiffuseState::new(2, 0, 0, true);
        d.send(Sender::Party(1), None).unwrap();
        assert!(d.completed[1]);
        assert!(d.adversary_peek().is_empty());
        assert!(matches!(d.send(Sender::Party(1), None), Err(Error::Protocol(_))));
    }

    #[test]
    fn peek_is_read_only_and_ordered() {
        let mut d = DiffuseState::new(3, 0, 0, true);
        assert!(d.adversary_peek().is_empty());
        d.send(Sender::Party(1), Some(BlockRef(3))).unwrap();
        d.send(Sender::Party(0), Some(BlockRef(4))).unwrap();
        let first = d.adversary_peek();
        assert_eq!(first, vec![(Sender::Party(1), BlockRef(3)), (Sender::Party(0), BlockRef(4))]);
        assert_eq!(d.adversary_peek(), first);
    }

    #[test]
    fn end_round_requires_completion() {
        let mut d = DiffuseState::new(2, 0, 0, true);
        d.send(Sender::Party(0), None).unwrap();
        d.mark_adversary_complete();
        assert!(d.end_round(&[Alert, Alert]).is_err());
        // sleepy parties do not need to complete
        assert!(d.end_round(&[Alert, Sleepy]).is_ok());
        let mut d = DiffuseState::new(1 + 1, 0, 0, true);
        d.send(Sender::Party(0), None).unwrap();
        d.send(Sender::Party(1), None).unwrap();
        assert!(d.end_round(&[Alert, Alert]).is_err(), "adversary must complete too");
    }

    #[test]
    fn sleepy_party_reads_backlog_when_b_is_one() {
        let mut d = DiffuseState::new(2, 0, 0, true);
        d.send(Sender::Party(0), Some(BlockRef(7))).unwrap();
        finish(&mut d, &[Alert, Sleepy]);
        assert_eq!(d.take_receive(1), vec![BlockRef(7)]);
        assert!(d.receive(1).is_empty());
    }

    #[test]
    fn sleepy_party_loses_message_when_b_is_zero() {
        let mut d = DiffuseState::new(2, 0, 0, false);
        d.send(Sender::Party(0), Some(BlockRef(7))).unwrap();
        let del = finish(&mut d, &[Alert, Sleepy]);
        assert!(del.for_party(1).is_empty());
        finish(&mut d, &[Alert, Alert]);
        assert!(d.receive(1).is_empty(), "lost for good");
        assert_eq!(d.receive(0), &[BlockRef(7)]);
    }

    #[test]
    fn corrupted_parties_cannot_send_directly() {
        let mut d = DiffuseState::new(3, 1, 0, true);
        assert!(d.send(Sender::Party(0), None).is_err());
        d.send(Sender::Adversary, Some(BlockRef(1))).unwrap();
        d.send(Sender::Adversary, Some(BlockRef(2))).unwrap();
        d.mark_adversary_complete();
        assert!(d.send(Sender::Adversary, None).is_err());
    }

    proptest::proptest! {
        /// With B = 1 every payload reaches every honest party exactly once and
        /// never before Δ rounds have passed; with B = 0 it misses exactly the
        /// parties asleep at its delivery round.
        #[test]
        fn delivery_timing_and_coverage(
            delta in 0u32..4,
            b_flag: bool,
            plan in proptest::collection::vec((proptest::collection::vec(proptest::bool::ANY, 4), proptest::option::of(0u32..4)), 1..30),
        ) {
            let n = 4u32;
            let mut d = DiffuseState::new(n, 0, delta, b_flag);
            let mut sent = Vec::new();
            let mut got: Vec<Vec<(u64, BlockRef)>> = vec![Vec::new(); n as usize];
            let mut sleepy_at = Vec::new();
            let mut next = 1u32;
            let rounds = plan.len() + delta as usize + 1;
            for r in 0..rounds {
                let (asleep, sender) = plan.get(r).cloned().unwrap_or((vec![false; 4], None));
                let st: Vec<Status> = asleep.iter().map(|&a| if a { Sleepy } else { Alert }).collect();
                if let Some(s) = sender {
                    if st[s as usize] == Alert {
                        d.send(Sender::Party(s), Some(BlockRef(next))).unwrap();
                        sent.push((d.round(), BlockRef(next)));
                        next += 1;
                    }
                }
                let round = d.round();
                let del = finish(&mut d, &st);
                for p in 0..n {
                    for &b in del.for_party(p) {
                        got[p as usize].push((round, b));
                    }
                }
                sleepy_at.push(st);
            }
            for &(sr, b) in &sent {
                let at = sr + delta as u64;
                for p in 0..n as usize {
                    let hits: Vec<_> = got[p].iter().filter(|(_, x)| *x == b).collect();
                    let asleep = sleepy_at[(at - 1) as usize][p] == Sleepy;
                    if b_flag || !asleep {
                        proptest::prop_assert_eq!(hits.len(), 1);
                        proptest::prop_assert_eq!(hits[0].0, at);
                    } else {
                        proptest::prop_assert!(hits.is_empty());
                    }
                }
            }
        }
    }
}
