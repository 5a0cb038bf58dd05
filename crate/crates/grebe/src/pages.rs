//! In-memory pages and the shared page pool.
//!
//! A page holds a contiguous element run of one column within one cluster.
//! In memory the payload is unpacked: little-endian scalars, one byte per
//! boolean. Packing to the disk form happens in [`pack_page`], which also
//! applies optional float mantissa truncation; [`unpack_page`] inverts it.
//!
//! The pool keeps at most one resident copy per page, hands out refcounted
//! handles, and evicts released pages least-recently-released first once a
//! byte budget is exceeded. Pages pinned by live handles are never evicted.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::format::{pack_bits, unpack_bits, PhysicalType};

/// One element run of one column, unpacked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub column_id: u32,
    pub physical_type: PhysicalType,
    /// Cluster-local index of the first element.
    pub first_element: u64,
    pub elements: u64,
    payload: Vec<u8>,
}

impl Page {
    pub fn new(
        column_id: u32,
        physical_type: PhysicalType,
        first_element: u64,
        elements: u64,
        payload: Vec<u8>,
    ) -> Result<Self> {
        if elements == 0 {
            return Err(Error::corruption("page must hold at least one element"));
        }
        let expect = match physical_type.width_bytes() {
            Some(w) => elements as usize * w,
            None => elements as usize,
        };
        if payload.len() != expect {
            return Err(Error::corruption(format!(
                "page payload holds {} bytes, {} elements of {} need {expect}",
                payload.len(),
                elements,
                physical_type.name()
            )));
        }
        Ok(Page { column_id, physical_type, first_element, elements, payload })
    }

    /// Unpacked bytes: fixed-width little-endian, or one byte per boolean.
    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// True when `index` (cluster-local) falls inside this page.
    pub fn covers(&self, index: u64) -> bool {
        index >= self.first_element && index < self.first_element + self.elements
    }

    /// Raw little-endian bytes of one element; `index` is cluster-local.
    pub fn element_bytes(&self, index: u64) -> Result<&[u8]> {
        if !self.covers(index) {
            return Err(Error::Bounds {
                index,
                len: self.first_element + self.elements,
            });
        }
        let local = (index - self.first_element) as usize;
        let w = self.physical_type.width_bytes().unwrap_or(1);
        Ok(&self.payload[local * w..(local + 1) * w])
    }
}

/// Number of explicit mantissa bits to keep when packing float pages.
///
/// Truncation zeroes the low mantissa bits, trading precision for
/// compressibility; the relative error is below `2^-bits`. Lossless unless
/// set. Decoding is unaffected: zeroed bits pass through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub mantissa_bits: u8,
}

impl Truncation {
    pub fn validate(self, ty: PhysicalType) -> Result<()> {
        let max = match ty {
            PhysicalType::Float32 => 23,
            PhysicalType::Float64 => 52,
            other => {
                return Err(Error::Usage(format!(
                    "truncation applies to float columns, not {}",
                    other.name()
                )))
            }
        };
        if self.mantissa_bits == 0 || self.mantissa_bits as u32 >= max {
            return Err(Error::Usage(format!(
                "mantissa bits must lie in 1..{max} for {}",
                ty.name()
            )));
        }
        Ok(())
    }
}

/// Packs a page into its on-disk form: bit-packs booleans, applies optional
/// mantissa truncation to floats, passes every other type through verbatim.
pub fn pack_page(page: &Page, truncation: Option<Truncation>) -> Result<Vec<u8>> {
    if let Some(t) = truncation {
        t.validate(page.physical_type)?;
    }
    match (page.physical_type, truncation) {
        (PhysicalType::Bit, _) => {
            let bools: Vec<bool> = page.payload.iter().map(|&b| b != 0).collect();
            Ok(pack_bits(&bools))
        }
        (PhysicalType::Float32, Some(t)) => {
            let drop = 23 - t.mantissa_bits as u32;
            let mask = !((1u32 << drop) - 1);
            let mut out = Vec::with_capacity(page.payload.len());
            for chunk in page.payload.chunks_exact(4) {
                let bits = u32::from_le_bytes(chunk.try_into().unwrap()) & mask;
                out.extend_from_slice(&bits.to_le_bytes());
            }
            Ok(out)
        }
        (PhysicalType::Float64, Some(t)) => {
            let drop = 52 - t.mantissa_bits as u32;
            let mask = !((1u64 << drop) - 1);
            let mut out = Vec::with_capacity(page.payload.len());
            for chunk in page.payload.chunks_exact(8) {
                let bits = u64::from_le_bytes(chunk.try_into().unwrap()) & mask;
                out.extend_from_slice(&bits.to_le_bytes());
            }
            Ok(out)
        }
        _ => Ok(page.payload.clone()),
    }
}

/// Rebuilds a page from its packed on-disk form.
pub fn unpack_page(
    packed: &[u8],
    column_id: u32,
    physical_type: PhysicalType,
    first_element: u64,
    elements: u64,
) -> Result<Page> {
    let expect = physical_type.payload_len(elements as usize);
    if packed.len() != expect {
        return Err(Error::corruption(format!(
            "packed page holds {} bytes, {} elements of {} need {expect}",
            packed.len(),
            elements,
            physical_type.name()
        )));
    }
    let payload = match physical_type.width_bytes() {
        Some(_) => packed.to_vec(),
        None => unpack_bits(packed, elements as usize)?
            .into_iter()
            .map(|b| b as u8)
            .collect(),
    };
    Page::new(column_id, physical_type, first_element, elements, payload)
}

/// Identity of a page within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PageKey {
    pub cluster: u32,
    pub column: u32,
    pub first_element: u64,
}

struct Slot {
    page: Arc<Page>,
    refs: u64,
    last_release: u64,
}

struct PoolInner {
    /// Per (cluster, column): pages keyed by first element, for range lookup.
    slots: HashMap<(u32, u32), BTreeMap<u64, Slot>>,
    /// Released pages ordered by release time; the eviction queue.
    releasable: BTreeSet<(u64, PageKey)>,
    resident_bytes: usize,
    release_clock: u64,
    budget_bytes: usize,
}

/// Shared page cache with a byte budget.
pub struct PagePool {
    inner: Mutex<PoolInner>,
}

/// Pinning handle; the page stays resident while any handle lives.
pub struct PageRef {
    pool: Arc<PagePool>,
    key: PageKey,
    page: Arc<Page>,
}

impl PageRef {
    pub fn page(&self) -> &Page {
        &self.page
    }
}

impl Drop for PageRef {
    fn drop(&mut self) {
        self.pool.release(self.key);
    }
}

impl PagePool {
    pub fn new(budget_bytes: usize) -> Arc<Self> {
        Arc::new(PagePool {
            inner: Mutex::new(PoolInner {
                slots: HashMap::new(),
                releasable: BTreeSet::new(),
                resident_bytes: 0,
                release_clock: 0,
                budget_bytes,
            }),
        })
    }

    /// Pins the resident page of `(cluster, column)` covering `element`,
    /// or returns `None` on a miss.
    pub fn acquire(self: &Arc<Self>, cluster: u32, column: u32, element: u64) -> Option<PageRef> {
        let mut inner = self.inner.lock().unwrap();
        let by_first = inner.slots.get_mut(&(cluster, column))?;
        let (&first, slot) = by_first.range_mut(..=element).next_back()?;
        if !slot.page.covers(element) {
            return None;
        }
        let key = PageKey { cluster, column, first_element: first };
        if slot.refs == 0 {
            let stamp = slot.last_release;
            inner.releasable.remove(&(stamp, key));
            let slot = inner
                .slots
                .get_mut(&(cluster, column))
                .unwrap()
                .get_mut(&first)
                .unwrap();
            slot.refs = 1;
            return Some(PageRef { pool: Arc::clone(self), key, page: Arc::clone(&slot.page) });
        }
        slot.refs += 1;
        Some(PageRef { pool: Arc::clone(self), key, page: Arc::clone(&slot.page) })
    }

    /// Inserts a loaded page and pins it. If the page is already resident
    /// (a concurrent load won the race), the existing copy is pinned and the
    /// argument is dropped: at most one copy stays resident.
    pub fn insert_pinned(self: &Arc<Self>, cluster: u32, page: Page) -> PageRef {
        let key = PageKey { cluster, column: page.column_id, first_element: page.first_element };
        let mut inner = self.inner.lock().unwrap();
        let by_first = inner.slots.entry((cluster, page.column_id)).or_default();
        if let Some(slot) = by_first.get_mut(&page.first_element) {
            if slot.refs == 0 {
                let stamp = slot.last_release;
                let page_arc = Arc::clone(&slot.page);
                slot.refs = 1;
                inner.releasable.remove(&(stamp, key));
                return PageRef { pool: Arc::clone(self), key, page: page_arc };
            }
            slot.refs += 1;
            let page_arc = Arc::clone(&slot.page);
            return PageRef { pool: Arc::clone(self), key, page: page_arc };
        }
        let bytes = page.payload.len();
        let page_arc = Arc::new(page);
        by_first.insert(
            key.first_element,
            Slot { page: Arc::clone(&page_arc), refs: 1, last_release: 0 },
        );
        inner.resident_bytes += bytes;
        self.evict_over_budget(&mut inner);
        PageRef { pool: Arc::clone(self), key, page: page_arc }
    }

    /// Inserts a prefetched page without pinning it; it is immediately
    /// evictable. No-op if already resident.
    pub fn insert(self: &Arc<Self>, cluster: u32, page: Page) {
        let r = self.insert_pinned(cluster, page);
        drop(r);
    }

    fn release(&self, key: PageKey) {
        let mut inner = self.inner.lock().unwrap();
        let slot = inner
            .slots
            .get_mut(&(key.cluster, key.column))
            .and_then(|m| m.get_mut(&key.first_element));
        let Some(slot) = slot else { return };
        slot.refs -= 1;
        if slot.refs == 0 {
            inner.release_clock += 1;
            let stamp = inner.release_clock;
            inner
                .slots
                .get_mut(&(key.cluster, key.column))
                .unwrap()
                .get_mut(&key.first_element)
                .unwrap()
                .last_release = stamp;
            inner.releasable.insert((stamp, key));
            self.evict_over_budget(&mut inner);
        }
    }

    fn evict_over_budget(&self, inner: &mut PoolInner) {
        while inner.resident_bytes > inner.budget_bytes {
            let Some(&(stamp, key)) = inner.releasable.iter().next() else {
                break; // everything resident is pinned
            };
            inner.releasable.remove(&(stamp, key));
            let by_first = inner.slots.get_mut(&(key.cluster, key.column)).unwrap();
            let slot = by_first.remove(&key.first_element).unwrap();
            inner.resident_bytes -= slot.page.payload.len();
            if by_first.is_empty() {
                inner.slots.remove(&(key.cluster, key.column));
            }
        }
    }

    pub fn resident_bytes(&self) -> usize {
        self.inner.lock().unwrap().resident_bytes
    }

    /// Drops every released page of one cluster, keeping pinned ones.
    pub fn evict_cluster(&self, cluster: u32) {
        let mut inner = self.inner.lock().unwrap();
        let keys: Vec<(u64, PageKey)> = inner
            .releasable
            .iter()
            .filter(|(_, k)| k.cluster == cluster)
            .copied()
            .collect();
        for (stamp, key) in keys {
            inner.releasable.remove(&(stamp, key));
            let mut freed = 0;
            let mut emptied = false;
            if let Some(by_first) = inner.slots.get_mut(&(key.cluster, key.column)) {
                if let Some(slot) = by_first.remove(&key.first_element) {
                    freed = slot.page.payload.len();
                }
                emptied = by_first.is_empty();
            }
            inner.resident_bytes -= freed;
            if emptied {
                inner.slots.remove(&(key.cluster, key.column));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn float_page(column: u32, first: u64, values: &[f32]) -> Page {
        let mut payload = Vec::new();
        for v in values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        Page::new(column, PhysicalType::Float32, first, values.len() as u64, payload).unwrap()
    }

    #[test]
    fn bit_pages_pack_and_unpack() {
        let page = Page::new(0, PhysicalType::Bit, 0, 3, vec![1, 0, 1]).unwrap();
        let packed = pack_page(&page, None).unwrap();
        assert_eq!(packed, vec![0x05]);
        let back = unpack_page(&packed, 0, PhysicalType::Bit, 0, 3).unwrap();
        assert_eq!(back, page);
    }

    #[test]
    fn scalar_pages_pass_through() {
        let page = float_page(2, 10, &[1.5, -2.5, 3.25]);
        let packed = pack_page(&page, None).unwrap();
        assert_eq!(packed, page.payload());
        let back = unpack_page(&packed, 2, PhysicalType::Float32, 10, 3).unwrap();
        assert_eq!(back, page);
    }

    #[test]
    fn truncation_bounds_relative_error() {
        let values: Vec<f32> = (1..1000).map(|i| (i as f32).sqrt() * 0.37).collect();
        let page = float_page(0, 0, &values);
        let packed = pack_page(&page, Some(Truncation { mantissa_bits: 10 })).unwrap();
        let back = unpack_page(&packed, 0, PhysicalType::Float32, 0, values.len() as u64).unwrap();
        for (orig, chunk) in values.iter().zip(back.payload().chunks_exact(4)) {
            let got = f32::from_le_bytes(chunk.try_into().unwrap());
            let rel = ((orig - got) / orig).abs();
            assert!(rel < 1.0 / 1024.0, "relative error {rel} at {orig}");
            // Truncation is monotone toward zero for positive values.
            assert!(got <= *orig);
        }
    }

    #[test]
    fn truncation_rejects_non_float_and_silly_widths() {
        let page = Page::new(0, PhysicalType::Int32, 0, 1, vec![1, 0, 0, 0]).unwrap();
        assert!(pack_page(&page, Some(Truncation { mantissa_bits: 10 })).is_err());
        let fpage = float_page(0, 0, &[1.0]);
        assert!(pack_page(&fpage, Some(Truncation { mantissa_bits: 0 })).is_err());
        assert!(pack_page(&fpage, Some(Truncation { mantissa_bits: 23 })).is_err());
        assert!(pack_page(&fpage, Some(Truncation { mantissa_bits: 22 })).is_ok());
    }

    #[test]
    fn zero_element_pages_rejected() {
        assert!(Page::new(0, PhysicalType::Int8, 0, 0, vec![]).is_err());
        assert!(unpack_page(&[], 0, PhysicalType::Int8, 0, 0).is_err());
    }

    #[test]
    fn wrong_payload_length_rejected() {
        assert!(Page::new(0, PhysicalType::Int32, 0, 2, vec![0; 7]).is_err());
        assert!(unpack_page(&[0; 7], 0, PhysicalType::Int32, 0, 2).is_err());
    }

    #[test]
    fn pool_hits_within_page_ranges() {
        let pool = PagePool::new(1 << 20);
        pool.insert(0, float_page(3, 0, &[1.0, 2.0, 3.0]));
        pool.insert(0, float_page(3, 3, &[4.0, 5.0]));

        let r = pool.acquire(0, 3, 4).expect("covered by second page");
        assert_eq!(r.page().first_element, 3);
        assert!(pool.acquire(0, 3, 5).is_none(), "past the last element");
        assert!(pool.acquire(0, 4, 0).is_none(), "other column");
        assert!(pool.acquire(1, 3, 0).is_none(), "other cluster");
    }

    #[test]
    fn pool_keeps_one_copy_per_page() {
        let pool = PagePool::new(1 << 20);
        let a = pool.insert_pinned(0, float_page(0, 0, &[1.0]));
        let b = pool.insert_pinned(0, float_page(0, 0, &[1.0]));
        assert_eq!(pool.resident_bytes(), 4);
        drop(a);
        drop(b);
        assert_eq!(pool.resident_bytes(), 4); // still cached, released
    }

    #[test]
    fn pool_evicts_least_recently_released_first() {
        // Budget fits two 4-byte pages.
        let pool = PagePool::new(8);
        let a = pool.insert_pinned(0, float_page(0, 0, &[1.0]));
        let b = pool.insert_pinned(0, float_page(0, 1, &[2.0]));
        drop(a); // released first
        drop(b);
        pool.insert(0, float_page(0, 2, &[3.0])); // exceeds budget
        assert!(pool.acquire(0, 0, 0).is_none(), "oldest release evicted");
        assert!(pool.acquire(0, 0, 1).is_some());
        assert!(pool.acquire(0, 0, 2).is_some());
    }

    #[test]
    fn pinned_pages_survive_budget_pressure() {
        let pool = PagePool::new(4);
        let pinned = pool.insert_pinned(0, float_page(0, 0, &[1.0]));
        pool.insert(0, float_page(0, 1, &[2.0])); // over budget; only unpinned page can go
        assert!(pool.acquire(0, 0, 1).is_none());
        assert_eq!(pinned.page().first_element, 0);
        assert!(pool.acquire(0, 0, 0).is_some(), "pinned page still resident");
    }

    #[test]
    fn reacquire_unpins_from_eviction_queue() {
        let pool = PagePool::new(100);
        let a = pool.insert_pinned(0, float_page(0, 0, &[1.0]));
        drop(a);
        let again = pool.acquire(0, 0, 0).unwrap();
        // Shrinking pressure must not evict the now-pinned page.
        pool.insert(0, float_page(0, 1, &(0..30).map(|i| i as f32).collect::<Vec<_>>()));
        assert!(again.page().covers(0));
        assert!(pool.acquire(0, 0, 0).is_some());
    }

    #[test]
    fn evict_cluster_clears_released_pages_only() {
        let pool = PagePool::new(1 << 20);
        let pinned = pool.insert_pinned(7, float_page(0, 0, &[1.0]));
        pool.insert(7, float_page(1, 0, &[2.0]));
        pool.insert(8, float_page(0, 0, &[3.0]));
        pool.evict_cluster(7);
        assert!(pool.acquire(7, 1, 0).is_none());
        assert!(pool.acquire(8, 0, 0).is_some());
        drop(pinned);
        assert!(pool.acquire(7, 0, 0).is_some(), "pinned page survived");
    }
}
