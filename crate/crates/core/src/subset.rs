//! Bitmask helpers for subsets of `[n]` (element `j` is bit `j - 1`).

/// Mask of the full set `[n]`.
pub fn full(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Size of a subset.
pub fn size(s: u64) -> usize {
    s.count_ones() as usize
}

/// Builds a mask from 1-based element indices.
pub fn from_elements(elems: &[usize]) -> u64 {
    elems.iter().fold(0u64, |m, &j| m | (1u64 << (j - 1)))
}

/// 1-based elements of a mask, ascending.
pub fn elements(mut s: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(size(s));
    while s != 0 {
        let b = s.trailing_zeros() as usize;
        out.push(b + 1);
        s &= s - 1;
    }
    out
}

/// All subsets of `[n]` of the given size, in increasing mask order.
pub fn of_size(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    if k == 0 {
        out.push(0);
        return out;
    }
    if k == 64 {
        out.push(u64::MAX);
        return out;
    }
    // Gosper's hack.
    let limit = full(n);
    let mut s: u64 = (1u64 << k) - 1;
    loop {
        out.push(s);
        let c = s & s.wrapping_neg();
        let r = s.wrapping_add(c);
        if r == 0 {
            break;
        }
        s = (((r ^ s) >> 2) / c) | r;
        if s > limit {
            break;
        }
    }
    out
}

/// Compresses the bits of `x` selected by `mask` into the low bits.
pub fn extract(x: u64, mut mask: u64) -> u64 {
    let mut out = 0u64;
    let mut i = 0;
    while mask != 0 {
        let b = mask.trailing_zeros();
        out |= ((x >> b) & 1) << i;
        i += 1;
        mask &= mask - 1;
    }
    out
}

/// Human-readable `{1,3}` form.
pub fn show(s: u64) -> String {
    let parts: Vec<String> = elements(s).iter().map(|j| j.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}
