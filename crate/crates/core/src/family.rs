//! Integer-indexed families of per-time objects (kernels, observables).

/// Either a finite window `start..start+len` or a periodic rule defined on
/// every integer index.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexedFamily<T> {
    Window { start: i64, items: Vec<T> },
    Periodic { items: Vec<T> },
}

impl<T> IndexedFamily<T> {
    pub fn window(start: i64, items: Vec<T>) -> Self {
        Self::Window { start, items }
    }

    /// Repeats `items` with period `items.len()` over all of ℤ; index 0
    /// maps to `items[0]`.
    pub fn periodic(items: Vec<T>) -> Self {
        assert!(!items.is_empty(), "periodic family needs at least one item");
        Self::Periodic { items }
    }

    pub fn constant(item: T) -> Self {
        Self::Periodic { items: vec![item] }
    }

    pub fn get(&self, index: i64) -> Option<&T> {
        self.slot(index).map(|s| &self.items()[s])
    }

    /// Position in [`items`](Self::items) of the item at `index`.
    pub fn slot(&self, index: i64) -> Option<usize> {
        match self {
            Self::Window { start, items } => {
                let o = usize::try_from(index.checked_sub(*start)?).ok()?;
                (o < items.len()).then_some(o)
            }
            Self::Periodic { items } => Some(index.rem_euclid(items.len() as i64) as usize),
        }
    }

    /// First defined index, `None` when unbounded below.
    pub fn first_index(&self) -> Option<i64> {
        match self {
            Self::Window { start, .. } => Some(*start),
            Self::Periodic { .. } => None,
        }
    }

    /// One past the last defined index, `None` when unbounded above.
    pub fn end_index(&self) -> Option<i64> {
        match self {
            Self::Window { start, items } => Some(start + items.len() as i64),
            Self::Periodic { .. } => None,
        }
    }

    pub fn period(&self) -> Option<usize> {
        match self {
            Self::Window { .. } => None,
            Self::Periodic { items } => Some(items.len()),
        }
    }

    /// Distinct stored items, in storage order.
    pub fn items(&self) -> &[T] {
        match self {
            Self::Window { items, .. } | Self::Periodic { items } => items,
        }
    }

    pub fn contains(&self, index: i64) -> bool {
        self.get(index).is_some()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> IndexedFamily<U> {
        match self {
            Self::Window { start, items } => IndexedFamily::Window {
                start: *start,
                items: items.iter().map(f).collect(),
            },
            Self::Periodic { items } => IndexedFamily::Periodic { items: items.iter().map(f).collect() },
        }
    }
}
