//! Point-to-point channels between simulated ranks.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::solver::transport::{Transport, WindowItem};
use crate::state::StateVector;

use super::{CommGroups, RankLayout};

/// Silently drops the `nth` (1-based) message sent from `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageFault {
    pub from: usize,
    pub to: usize,
    pub nth: usize,
}

enum Payload<S> {
    Halo(Option<S>),
    Items(Vec<(usize, WindowItem<S>)>),
    Floats(Vec<f64>),
}

struct Message<S> {
    tag: &'static str,
    payload: Payload<S>,
}

pub(crate) struct ChannelTransport<'a, S> {
    rank: usize,
    layout: &'a RankLayout,
    groups: &'a CommGroups,
    senders: Vec<Option<Sender<Message<S>>>>,
    receivers: Vec<Option<Receiver<Message<S>>>>,
    timeout: Duration,
    fault: Option<MessageFault>,
    sent: RefCell<Vec<usize>>,
    round_messages: RefCell<[usize; 2]>,
}

/// One transport per rank, fully connected.
pub(crate) fn connect<'a, S>(
    layout: &'a RankLayout,
    groups: &'a CommGroups,
    timeout: Duration,
    fault: Option<MessageFault>,
) -> Vec<ChannelTransport<'a, S>> {
    let p = layout.workers();
    let mut senders: Vec<Vec<Option<Sender<Message<S>>>>> =
        (0..p).map(|_| (0..p).map(|_| None).collect()).collect();
    let mut receivers: Vec<Vec<Option<Receiver<Message<S>>>>> =
        (0..p).map(|_| (0..p).map(|_| None).collect()).collect();
    for src in 0..p {
        for dst in 0..p {
            if src != dst {
                let (tx, rx) = channel();
                senders[src][dst] = Some(tx);
                receivers[dst][src] = Some(rx);
            }
        }
    }
    senders
        .into_iter()
        .zip(receivers)
        .enumerate()
        .map(|(rank, (senders, receivers))| ChannelTransport {
            rank,
            layout,
            groups,
            senders,
            receivers,
            timeout,
            fault,
            sent: RefCell::new(vec![0; p]),
            round_messages: RefCell::new([0; 2]),
        })
        .collect()
}

impl<S> ChannelTransport<'_, S> {
    /// Messages this rank sent in each exchange round.
    pub fn round_messages(&self) -> [usize; 2] {
        *self.round_messages.borrow()
    }

    fn send(&self, dst: usize, tag: &'static str, payload: Payload<S>) -> Result<()> {
        let nth = {
            let mut sent = self.sent.borrow_mut();
            sent[dst] += 1;
            sent[dst]
        };
        if self.fault == Some(MessageFault { from: self.rank, to: dst, nth }) {
            log::warn!("rank {}: dropping message {nth} ({tag}) to rank {dst}", self.rank);
            return Ok(());
        }
        let tx = self.senders[dst].as_ref().expect("no channel to self");
        tx.send(Message { tag, payload }).map_err(|_| Error::Runtime {
            rank: self.rank,
            peer: Some(dst),
            message: format!("peer stopped before receiving {tag}"),
        })
    }

    fn recv(&self, src: usize, tag: &'static str) -> Result<Payload<S>> {
        let rx = self.receivers[src].as_ref().expect("no channel to self");
        let msg = rx.recv_timeout(self.timeout).map_err(|e| Error::Runtime {
            rank: self.rank,
            peer: Some(src),
            message: match e {
                RecvTimeoutError::Timeout => {
                    format!("timed out after {:?} waiting for {tag}", self.timeout)
                }
                RecvTimeoutError::Disconnected => format!("peer stopped while awaiting {tag}"),
            },
        })?;
        if msg.tag != tag {
            return Err(Error::Runtime {
                rank: self.rank,
                peer: Some(src),
                message: format!("expected {tag}, received {}", msg.tag),
            });
        }
        Ok(msg.payload)
    }

    fn protocol_error(&self, src: usize, tag: &'static str) -> Error {
        Error::Runtime {
            rank: self.rank,
            peer: Some(src),
            message: format!("malformed {tag} payload"),
        }
    }

    /// Coarsest points whose window items `rank` needs.
    fn needs(&self, rank: usize) -> std::ops::Range<usize> {
        let block = self.layout.coarse_block(rank);
        self.groups.window(block.start).start..block.end
    }
}

impl<S: StateVector> Transport<S> for ChannelTransport<'_, S> {
    fn rank(&self) -> usize {
        self.rank
    }

    fn shift_right(&self, last: Option<&S>) -> Result<Option<S>> {
        if self.rank + 1 < self.layout.workers() {
            self.send(self.rank + 1, "halo", Payload::Halo(last.cloned()))?;
        }
        if self.rank == 0 {
            return Ok(None);
        }
        match self.recv(self.rank - 1, "halo")? {
            Payload::Halo(Some(v)) => Ok(Some(v)),
            _ => Err(self.protocol_error(self.rank - 1, "halo")),
        }
    }

    fn gather_windows(
        &self,
        own: BTreeMap<usize, WindowItem<S>>,
    ) -> Result<BTreeMap<usize, WindowItem<S>>> {
        let mut held = own;
        for (round, groups) in self.groups.rounds().into_iter().enumerate() {
            let snapshot = held.clone();
            for group in groups {
                let mut ranks: Vec<usize> = group.clone().map(|p| self.layout.owner(p)).collect();
                ranks.dedup();
                if ranks.len() < 2 || !ranks.contains(&self.rank) {
                    continue;
                }
                for &dst in ranks.iter().filter(|&&r| r != self.rank) {
                    let theirs = self.layout.coarse_block(dst);
                    let items = snapshot
                        .range(self.needs(dst))
                        .filter(|(j, _)| !theirs.contains(j))
                        .map(|(&j, item)| (j, item.clone()))
                        .collect();
                    self.send(dst, "window items", Payload::Items(items))?;
                    self.round_messages.borrow_mut()[round] += 1;
                }
                for &src in ranks.iter().filter(|&&r| r != self.rank) {
                    match self.recv(src, "window items")? {
                        Payload::Items(items) => held.extend(items),
                        _ => return Err(self.protocol_error(src, "window items")),
                    }
                }
            }
        }
        let mine = self.needs(self.rank);
        held.retain(|j, _| mine.contains(j));
        Ok(held)
    }

    fn all_gather(&self, local: Vec<f64>) -> Result<Vec<f64>> {
        let p = self.layout.workers();
        if self.rank != 0 {
            self.send(0, "gather", Payload::Floats(local))?;
            return match self.recv(0, "broadcast")? {
                Payload::Floats(all) => Ok(all),
                _ => Err(self.protocol_error(0, "broadcast")),
            };
        }
        let mut all = local;
        for src in 1..p {
            match self.recv(src, "gather")? {
                Payload::Floats(v) => all.extend(v),
                _ => return Err(self.protocol_error(src, "gather")),
            }
        }
        for dst in 1..p {
            self.send(dst, "broadcast", Payload::Floats(all.clone()))?;
        }
        Ok(all)
    }
}
