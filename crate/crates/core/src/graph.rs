//! Temporal follower graph with photo, favorite and group events.
//!
//! Users are stored densely, sorted by [`UserId`]; the dense position of a
//! user is its *index* and is what snapshots and profiles are keyed by.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const SECONDS_PER_WEEK: i64 = 604_800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct UserId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct PhotoId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct GroupId(pub u64);

/// Seven-day bin counted from the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Week(pub u32);

impl Week {
    /// First second of the week.
    pub fn start(self) -> i64 {
        i64::from(self.0) * SECONDS_PER_WEEK
    }

    pub fn next(self) -> Week {
        Week(self.0 + 1)
    }
}

pub fn week_of(t: i64) -> Result<Week> {
    if t < 0 {
        return Err(Error::NegativeTimestamp(t));
    }
    Ok(Week((t / SECONDS_PER_WEEK) as u32))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FollowEvent {
    pub src: UserId,
    pub dst: UserId,
    pub t: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhotoEvent {
    pub owner: UserId,
    pub photo: PhotoId,
    pub t: i64,
    pub beauty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FavoriteEvent {
    pub actor: UserId,
    pub photo: PhotoId,
    pub t: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupEvent {
    pub member: UserId,
    pub group: GroupId,
    pub t: i64,
}

/// A timestamped follow link seen from one endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Link {
    pub t: i64,
    /// Dense index of the other endpoint.
    pub other: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photo {
    pub t: i64,
    pub id: PhotoId,
    pub beauty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Favorite {
    pub t: i64,
    pub photo: PhotoId,
    /// Dense index of the user on the other side (owner for given
    /// favorites, actor for received ones).
    pub other: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Membership {
    pub t: i64,
    pub group: GroupId,
}

/// Photo count and beauty sum of one active week.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeekTotals {
    pub week: Week,
    pub count: u32,
    pub sum: f64,
}

/// Everything known about one user; all lists are time-sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub id: UserId,
    pub join_week: Week,
    pub follows_out: Vec<Link>,
    pub follows_in: Vec<Link>,
    pub photos: Vec<Photo>,
    pub favorites_given: Vec<Favorite>,
    pub favorites_received: Vec<Favorite>,
    pub groups: Vec<Membership>,
    weekly: Vec<WeekTotals>,
    // prefix[k] = totals over weekly[..k]
    prefix: Vec<(u32, f64)>,
}

/// Photo count and beauty sum over some range of weeks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhotoTotals {
    pub count: u32,
    pub sum: f64,
}

impl PhotoTotals {
    pub fn mean(self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / f64::from(self.count))
    }
}

impl UserRecord {
    /// Per-week photo totals for the weeks in which the user uploaded.
    pub fn weekly(&self) -> &[WeekTotals] {
        &self.weekly
    }

    fn prefix_totals(&self, k: usize) -> PhotoTotals {
        let (count, sum) = self.prefix[k];
        PhotoTotals { count, sum }
    }

    /// Photos uploaded in weeks strictly before `w`.
    pub fn photos_before(&self, w: Week) -> PhotoTotals {
        let k = self.weekly.partition_point(|x| x.week < w);
        self.prefix_totals(k)
    }

    /// Photos uploaded in weeks up to and including `w`.
    pub fn photos_through(&self, w: Week) -> PhotoTotals {
        let k = self.weekly.partition_point(|x| x.week <= w);
        self.prefix_totals(k)
    }

    /// Photos uploaded during week `w`.
    pub fn photos_in(&self, w: Week) -> PhotoTotals {
        match self.weekly.binary_search_by(|x| x.week.cmp(&w)) {
            Ok(k) => PhotoTotals {
                count: self.weekly[k].count,
                sum: self.weekly[k].sum,
            },
            Err(_) => PhotoTotals::default(),
        }
    }

    /// Photos uploaded in weeks `from..=to`.
    pub fn photos_between(&self, from: Week, to: Week) -> PhotoTotals {
        if to < from {
            return PhotoTotals::default();
        }
        let a = self.photos_before(from);
        let b = self.photos_through(to);
        PhotoTotals {
            count: b.count - a.count,
            sum: b.sum - a.sum,
        }
    }

    pub fn is_active(&self, w: Week) -> bool {
        self.weekly.binary_search_by(|x| x.week.cmp(&w)).is_ok()
    }

    /// Number of distinct active weeks strictly before `w`.
    pub fn active_weeks_before(&self, w: Week) -> usize {
        self.weekly.partition_point(|x| x.week < w)
    }

    pub fn active_weeks(&self) -> usize {
        self.weekly.len()
    }

    /// Followees acquired strictly before the start of `w`.
    pub fn follows_out_before(&self, w: Week) -> &[Link] {
        let start = w.start();
        let k = self.follows_out.partition_point(|l| l.t < start);
        &self.follows_out[..k]
    }

    /// Follow links created during week `w`.
    pub fn follows_out_in(&self, w: Week) -> &[Link] {
        let (start, end) = (w.start(), w.next().start());
        let a = self.follows_out.partition_point(|l| l.t < start);
        let b = self.follows_out.partition_point(|l| l.t < end);
        &self.follows_out[a..b]
    }

    pub fn in_degree_before(&self, w: Week) -> usize {
        let start = w.start();
        self.follows_in.partition_point(|l| l.t < start)
    }

    pub fn favorites_given_before(&self, w: Week) -> usize {
        let start = w.start();
        self.favorites_given.partition_point(|f| f.t < start)
    }

    pub fn favorites_received_before(&self, w: Week) -> usize {
        let start = w.start();
        self.favorites_received.partition_point(|f| f.t < start)
    }

    pub fn groups_before(&self, w: Week) -> usize {
        let start = w.start();
        self.groups.partition_point(|g| g.t < start)
    }
}

/// Immutable temporal graph produced by [`GraphBuilder::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph {
    users: Vec<UserRecord>,
    edge_count: usize,
    last_week: Option<Week>,
}

impl TemporalGraph {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn photo_count(&self) -> usize {
        self.users.iter().map(|u| u.photos.len()).sum()
    }

    pub fn favorite_count(&self) -> usize {
        self.users.iter().map(|u| u.favorites_given.len()).sum()
    }

    pub fn group_event_count(&self) -> usize {
        self.users.iter().map(|u| u.groups.len()).sum()
    }

    /// Latest week containing any event.
    pub fn last_week(&self) -> Option<Week> {
        self.last_week
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn user(&self, index: usize) -> &UserRecord {
        &self.users[index]
    }

    pub fn ids(&self) -> impl Iterator<Item = UserId> + '_ {
        self.users.iter().map(|u| u.id)
    }

    pub fn index_of(&self, id: UserId) -> Option<usize> {
        self.users.binary_search_by(|u| u.id.cmp(&id)).ok()
    }

    pub fn record(&self, id: UserId) -> Result<&UserRecord> {
        self.index_of(id)
            .map(|i| &self.users[i])
            .ok_or(Error::UnknownUser(id.0))
    }

    /// Weeks in which `id` uploaded at least one photo.
    pub fn activity_weeks(&self, id: UserId) -> Result<BTreeSet<Week>> {
        Ok(self.record(id)?.weekly.iter().map(|x| x.week).collect())
    }

    /// Follow graph restricted to edges created strictly before week `w`.
    pub fn snapshot_at(&self, w: Week) -> GraphSnapshot {
        let start = w.start();
        self.snapshot_where(Some(w), |l| l.t < start)
    }

    /// Follow graph with every edge ever created.
    pub fn final_snapshot(&self) -> GraphSnapshot {
        self.snapshot_where(None, |_| true)
    }

    fn snapshot_where(&self, week: Option<Week>, keep: impl Fn(&Link) -> bool) -> GraphSnapshot {
        let out: Vec<Vec<u32>> = self
            .users
            .iter()
            .map(|u| {
                let mut v: Vec<u32> = u.follows_out.iter().filter(|l| keep(l)).map(|l| l.other).collect();
                v.sort_unstable();
                v
            })
            .collect();
        let inn: Vec<Vec<u32>> = self
            .users
            .iter()
            .map(|u| {
                let mut v: Vec<u32> = u.follows_in.iter().filter(|l| keep(l)).map(|l| l.other).collect();
                v.sort_unstable();
                v
            })
            .collect();
        let edges = out.iter().map(Vec::len).sum();
        GraphSnapshot {
            week,
            ids: self.users.iter().map(|u| u.id).collect(),
            out,
            inn,
            edges,
        }
    }
}

/// Static follow graph: out- and in-adjacency over dense user indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSnapshot {
    week: Option<Week>,
    ids: Vec<UserId>,
    out: Vec<Vec<u32>>,
    inn: Vec<Vec<u32>>,
    edges: usize,
}

impl GraphSnapshot {
    /// Builds a snapshot from an explicit edge list over `ids`.
    ///
    /// Self-loops and duplicate edges are dropped; `ids` must be distinct.
    pub fn from_edges(ids: Vec<UserId>, edges: &[(usize, usize)]) -> Self {
        let n = ids.len();
        let mut out = alloc::vec![Vec::new(); n];
        let mut inn = alloc::vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && a < n && b < n {
                out[a].push(b as u32);
                inn[b].push(a as u32);
            }
        }
        let mut count = 0;
        for list in out.iter_mut().chain(inn.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        for list in &out {
            count += list.len();
        }
        GraphSnapshot {
            week: None,
            ids,
            out,
            inn,
            edges: count,
        }
    }

    /// Week the snapshot was taken at; `None` for a final or ad-hoc graph.
    pub fn week(&self) -> Option<Week> {
        self.week
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn id(&self, index: usize) -> UserId {
        self.ids[index]
    }

    pub fn ids(&self) -> &[UserId] {
        &self.ids
    }

    pub fn index_of(&self, id: UserId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    /// Sorted followees of `index`.
    pub fn out_neighbors(&self, index: usize) -> &[u32] {
        &self.out[index]
    }

    /// Sorted followers of `index`.
    pub fn in_neighbors(&self, index: usize) -> &[u32] {
        &self.inn[index]
    }

    pub fn out_degree(&self, index: usize) -> usize {
        self.out[index].len()
    }

    pub fn in_degree(&self, index: usize) -> usize {
        self.inn[index].len()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.out[from].binary_search(&(to as u32)).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().map(move |&b| (a, b as usize)))
    }
}

/// Non-fatal problem found while building a graph.
#[derive(Debug, Clone, PartialEq)]
pub enum IngestWarning {
    /// A favorite referenced a photo absent from the photo stream; the
    /// record (by position in the favorite stream) was dropped.
    UnknownPhoto { record: usize, photo: PhotoId },
}

/// Collects event records and materializes a [`TemporalGraph`].
///
/// Records may arrive in any order; the built graph depends only on the
/// multiset of records.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    follows: Vec<FollowEvent>,
    photos: Vec<PhotoEvent>,
    favorites: Vec<(usize, FavoriteEvent)>,
    groups: Vec<GroupEvent>,
}

fn check_time(t: i64) -> Result<()> {
    week_of(t).map(|_| ())
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_follow(&mut self, e: FollowEvent) -> Result<()> {
        check_time(e.t)?;
        if e.src == e.dst {
            return Err(Error::SelfFollow(e.src.0));
        }
        self.follows.push(e);
        Ok(())
    }

    pub fn add_photo(&mut self, e: PhotoEvent) -> Result<()> {
        check_time(e.t)?;
        if !(0.0..=1.0).contains(&e.beauty) {
            return Err(Error::BeautyOutOfRange(e.beauty));
        }
        self.photos.push(e);
        Ok(())
    }

    pub fn add_favorite(&mut self, e: FavoriteEvent) -> Result<()> {
        check_time(e.t)?;
        let record = self.favorites.len();
        self.favorites.push((record, e));
        Ok(())
    }

    pub fn add_group(&mut self, e: GroupEvent) -> Result<()> {
        check_time(e.t)?;
        self.groups.push(e);
        Ok(())
    }

    pub fn build(self) -> Result<(TemporalGraph, Vec<IngestWarning>)> {
        let GraphBuilder {
            mut follows,
            mut photos,
            mut favorites,
            mut groups,
        } = self;

        // Duplicate (src, dst) pairs keep the earliest timestamp.
        follows.sort_by_key(|e| (e.src, e.dst, e.t));
        follows.dedup_by_key(|e| (e.src, e.dst));
        groups.sort_by_key(|e| (e.member, e.group, e.t));
        groups.dedup_by_key(|e| (e.member, e.group));

        photos.sort_by(|a, b| a.photo.cmp(&b.photo).then(a.t.cmp(&b.t)).then(a.owner.cmp(&b.owner)));
        for pair in photos.windows(2) {
            if pair[0].photo == pair[1].photo {
                return Err(Error::DuplicatePhoto(pair[0].photo.0));
            }
        }

        let mut warnings = Vec::new();
        favorites.sort_by_key(|(_, e)| (e.photo, e.actor, e.t));
        let mut owners: Vec<Option<UserId>> = Vec::with_capacity(favorites.len());
        for (record, e) in &favorites {
            match photos.binary_search_by(|p| p.photo.cmp(&e.photo)) {
                Ok(k) => owners.push(Some(photos[k].owner)),
                Err(_) => {
                    warnings.push(IngestWarning::UnknownPhoto {
                        record: *record,
                        photo: e.photo,
                    });
                    owners.push(None);
                }
            }
        }
        warnings.sort_by_key(|w| match w {
            IngestWarning::UnknownPhoto { record, .. } => *record,
        });

        let mut ids: Vec<UserId> = Vec::new();
        ids.extend(follows.iter().flat_map(|e| [e.src, e.dst]));
        ids.extend(photos.iter().map(|e| e.owner));
        ids.extend(groups.iter().map(|e| e.member));
        for ((_, e), owner) in favorites.iter().zip(&owners) {
            if owner.is_some() {
                ids.push(e.actor);
            }
        }
        ids.sort_unstable();
        ids.dedup();
        let index = |id: UserId| ids.binary_search(&id).expect("collected id") as u32;

        let mut users: Vec<UserRecord> = ids
            .iter()
            .map(|&id| UserRecord {
                id,
                join_week: Week(u32::MAX),
                follows_out: Vec::new(),
                follows_in: Vec::new(),
                photos: Vec::new(),
                favorites_given: Vec::new(),
                favorites_received: Vec::new(),
                groups: Vec::new(),
                weekly: Vec::new(),
                prefix: Vec::new(),
            })
            .collect();

        let mut last_t: Option<i64> = None;
        let mut touch = |users: &mut [UserRecord], i: u32, t: i64| {
            let w = Week((t / SECONDS_PER_WEEK) as u32);
            let u = &mut users[i as usize];
            if w < u.join_week {
                u.join_week = w;
            }
            last_t = Some(last_t.map_or(t, |m: i64| m.max(t)));
        };

        let edge_count = follows.len();
        for e in &follows {
            let (s, d) = (index(e.src), index(e.dst));
            users[s as usize].follows_out.push(Link { t: e.t, other: d });
            users[d as usize].follows_in.push(Link { t: e.t, other: s });
            touch(&mut users, s, e.t);
            touch(&mut users, d, e.t);
        }
        for e in &photos {
            let o = index(e.owner);
            users[o as usize].photos.push(Photo {
                t: e.t,
                id: e.photo,
                beauty: e.beauty,
            });
            touch(&mut users, o, e.t);
        }
        for ((_, e), owner) in favorites.iter().zip(&owners) {
            let Some(owner) = owner else { continue };
            let (a, o) = (index(e.actor), index(*owner));
            users[a as usize].favorites_given.push(Favorite {
                t: e.t,
                photo: e.photo,
                other: o,
            });
            users[o as usize].favorites_received.push(Favorite {
                t: e.t,
                photo: e.photo,
                other: a,
            });
            touch(&mut users, a, e.t);
        }
        for e in &groups {
            let m = index(e.member);
            users[m as usize].groups.push(Membership { t: e.t, group: e.group });
            touch(&mut users, m, e.t);
        }

        for u in &mut users {
            u.follows_out.sort_unstable();
            u.follows_in.sort_unstable();
            u.photos.sort_by(|a, b| a.t.cmp(&b.t).then(a.id.cmp(&b.id)));
            u.favorites_given.sort_unstable_by_key(|f| (f.t, f.photo, f.other));
            u.favorites_received.sort_unstable_by_key(|f| (f.t, f.photo, f.other));
            u.groups.sort_unstable_by_key(|g| (g.t, g.group));

            let mut weekly: Vec<WeekTotals> = Vec::new();
            for p in &u.photos {
                let w = Week((p.t / SECONDS_PER_WEEK) as u32);
                match weekly.last_mut() {
                    Some(last) if last.week == w => {
                        last.count += 1;
                        last.sum += p.beauty;
                    }
                    _ => weekly.push(WeekTotals {
                        week: w,
                        count: 1,
                        sum: p.beauty,
                    }),
                }
            }
            let mut prefix = Vec::with_capacity(weekly.len() + 1);
            let (mut c, mut s) = (0u32, 0.0f64);
            prefix.push((c, s));
            for x in &weekly {
                c += x.count;
                s += x.sum;
                prefix.push((c, s));
            }
            u.weekly = weekly;
            u.prefix = prefix;
        }

        let graph = TemporalGraph {
            users,
            edge_count,
            last_week: last_t.map(|t| Week((t / SECONDS_PER_WEEK) as u32)),
        };
        Ok((graph, warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn follow(src: u64, dst: u64, t: i64) -> FollowEvent {
        FollowEvent {
            src: UserId(src),
            dst: UserId(dst),
            t,
        }
    }

    fn photo(owner: u64, id: u64, t: i64, beauty: f64) -> PhotoEvent {
        PhotoEvent {
            owner: UserId(owner),
            photo: PhotoId(id),
            t,
            beauty,
        }
    }

    fn build(follows: &[FollowEvent], photos: &[PhotoEvent]) -> TemporalGraph {
        let mut b = GraphBuilder::new();
        for &f in follows {
            b.add_follow(f).unwrap();
        }
        for &p in photos {
            b.add_photo(p).unwrap();
        }
        b.build().unwrap().0
    }

    #[test]
    fn week_boundaries() {
        assert_eq!(week_of(0).unwrap(), Week(0));
        assert_eq!(week_of(604_799).unwrap(), Week(0));
        assert_eq!(week_of(604_800).unwrap(), Week(1));
        assert_eq!(week_of(-1), Err(Error::NegativeTimestamp(-1)));
    }

    #[test]
    fn empty_streams() {
        let (g, w) = GraphBuilder::new().build().unwrap();
        assert_eq!(g.user_count(), 0);
        assert_eq!(g.edge_count(), 0);
        assert!(w.is_empty());
        assert_eq!(g.last_week(), None);
    }

    #[test]
    fn single_edge_visible_from_next_week() {
        let g = build(&[follow(1, 2, 0)], &[]);
        assert_eq!(g.user_count(), 2);
        assert_eq!(g.edge_count(), 1);
        let s = g.snapshot_at(Week(1));
        assert!(s.has_edge(0, 1));
        assert_eq!(g.snapshot_at(Week(0)).edge_count(), 0);
    }

    #[test]
    fn duplicate_follow_keeps_earliest() {
        let g = build(&[follow(1, 2, 10), follow(1, 2, 5)], &[]);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.user(0).follows_out, vec![Link { t: 5, other: 1 }]);
    }

    #[test]
    fn snapshot_boundary_is_strict() {
        let t = 3 * SECONDS_PER_WEEK + 100;
        let g = build(&[follow(1, 2, t)], &[]);
        assert_eq!(g.snapshot_at(Week(3)).edge_count(), 0);
        assert_eq!(g.snapshot_at(Week(4)).edge_count(), 1);
        assert_eq!(g.snapshot_at(Week(0)).edge_count(), 0);
    }

    #[test]
    fn activity_weeks_cases() {
        let w = SECONDS_PER_WEEK;
        let g = build(
            &[follow(3, 1, 0)],
            &[
                photo(1, 1, 0, 0.5),
                photo(1, 2, 100, 0.5),
                photo(2, 3, 0, 0.1),
                photo(2, 4, w, 0.1),
                photo(2, 5, 5 * w, 0.1),
            ],
        );
        let weeks = |id| g.activity_weeks(UserId(id)).unwrap().into_iter().collect::<Vec<_>>();
        assert_eq!(weeks(1), vec![Week(0)]);
        assert_eq!(weeks(2), vec![Week(0), Week(1), Week(5)]);
        assert!(weeks(3).is_empty());
        assert_eq!(g.activity_weeks(UserId(99)), Err(Error::UnknownUser(99)));
    }

    #[test]
    fn rejects_bad_records() {
        let mut b = GraphBuilder::new();
        assert_eq!(b.add_follow(follow(1, 1, 0)), Err(Error::SelfFollow(1)));
        assert_eq!(b.add_follow(follow(1, 2, -5)), Err(Error::NegativeTimestamp(-5)));
        assert_eq!(b.add_photo(photo(1, 1, 0, 1.5)), Err(Error::BeautyOutOfRange(1.5)));
        b.add_photo(photo(1, 1, 0, 0.5)).unwrap();
        b.add_photo(photo(2, 1, 0, 0.5)).unwrap();
        assert_eq!(b.build().unwrap_err(), Error::DuplicatePhoto(1));
    }

    #[test]
    fn unknown_favorite_is_dropped_with_warning() {
        let mut b = GraphBuilder::new();
        b.add_photo(photo(1, 7, 0, 0.5)).unwrap();
        b.add_favorite(FavoriteEvent {
            actor: UserId(2),
            photo: PhotoId(7),
            t: 10,
        })
        .unwrap();
        b.add_favorite(FavoriteEvent {
            actor: UserId(3),
            photo: PhotoId(8),
            t: 10,
        })
        .unwrap();
        let (g, warnings) = b.build().unwrap();
        assert_eq!(
            warnings,
            vec![IngestWarning::UnknownPhoto {
                record: 1,
                photo: PhotoId(8)
            }]
        );
        assert_eq!(g.user_count(), 2);
        assert_eq!(g.favorite_count(), 1);
        let owner = g.record(UserId(1)).unwrap();
        assert_eq!(owner.favorites_received.len(), 1);
    }

    #[test]
    fn join_week_and_photo_windows() {
        let w = SECONDS_PER_WEEK;
        let g = build(
            &[follow(1, 2, 9 * w)],
            &[
                photo(1, 1, 5 * w, 0.2),
                photo(1, 2, 5 * w + 1, 0.4),
                photo(1, 3, 7 * w, 0.9),
            ],
        );
        let u = g.record(UserId(1)).unwrap();
        assert_eq!(u.join_week, Week(5));
        assert_eq!(g.record(UserId(2)).unwrap().join_week, Week(9));
        assert_eq!(u.photos_before(Week(5)).count, 0);
        assert_eq!(u.photos_through(Week(5)).count, 2);
        assert!((u.photos_in(Week(5)).mean().unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(u.photos_between(Week(6), Week(7)).count, 1);
        assert_eq!(u.active_weeks_before(Week(8)), 2);
        assert_eq!(g.last_week(), Some(Week(9)));
    }
}
