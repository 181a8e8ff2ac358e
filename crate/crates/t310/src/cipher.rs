//! Bit-exact T-310 cipher core: 36-bit state, round function, key schedule,
//! IV LFSR, keystream extraction and 5-bit character encryption.
//!
//! Conventions (the historical documents leave them open; everything here is
//! consistent and the analytic results depend only on logical bit indices):
//! - State hex is 9 digits with `u_1` as the most significant bit of the
//!   36-bit value; the standard initial state is `0xC5A13E396`.
//! - Short-term key hex is 60 digits, `s1` then `s2`, each half with bit 1 as
//!   its most significant bit. Round `m` uses bit `((m-1) mod 120) + 1`.
//! - IV hex is 16 digits with the top 3 bits zero; `f_1` is the most
//!   significant bit of the 61-bit value, and the first 61 IV bits are the
//!   register contents in index order.

use crate::boolfn::Z_TT;
use crate::{Error, Result};
use std::fmt;

/// The fixed 36-bit initial state.
pub const INITIAL_STATE_HEX: u64 = 0xC_5A13_E396;

/// The block cipher state `u_1..u_36`; internally bit `i-1` holds `u_i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CipherState(u64);

const STATE_MASK: u64 = (1 << 36) - 1;

impl CipherState {
    pub fn initial() -> Self {
        Self::from_hex_value(INITIAL_STATE_HEX)
    }

    /// Build from a 36-bit value whose most significant bit is `u_1`.
    pub fn from_hex_value(v: u64) -> Self {
        debug_assert!(v <= STATE_MASK);
        let mut bits = 0u64;
        for i in 1..=36 {
            if (v >> (36 - i)) & 1 == 1 {
                bits |= 1 << (i - 1);
            }
        }
        CipherState(bits)
    }

    pub fn to_hex_value(self) -> u64 {
        let mut v = 0u64;
        for i in 1..=36 {
            if self.bit(i) {
                v |= 1 << (36 - i);
            }
        }
        v
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 9 {
            return Err(Error::Parse(format!(
                "state must be 9 hex digits, got {}",
                s.len()
            )));
        }
        let v = u64::from_str_radix(s, 16)
            .map_err(|e| Error::Parse(format!("bad state hex: {e}")))?;
        Ok(Self::from_hex_value(v))
    }

    pub fn to_hex(self) -> String {
        format!("{:09X}", self.to_hex_value())
    }

    pub fn from_raw(bits: u64) -> Self {
        CipherState(bits & STATE_MASK)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// Logical bit `u_i`, `i` in 1..=36.
    pub fn bit(self, i: usize) -> bool {
        debug_assert!((1..=36).contains(&i));
        (self.0 >> (i - 1)) & 1 == 1
    }

    pub fn with_bit(self, i: usize, v: bool) -> Self {
        let mask = 1 << (i - 1);
        CipherState(if v { self.0 | mask } else { self.0 & !mask })
    }

    /// XOR of the bits selected by a list of 1-based indices.
    pub fn parity(self, mask: &[u8]) -> bool {
        let mut acc = false;
        for &i in mask {
            acc ^= self.bit(i as usize);
        }
        acc
    }
}

impl fmt::Debug for CipherState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CipherState({})", self.to_hex())
    }
}

/// Long term key: the wiring triple steering the round function.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LongTermKey {
    pub d: [u8; 9],
    pub p: [u8; 27],
    pub alpha: u8,
}

impl LongTermKey {
    pub fn new(d: [u8; 9], p: [u8; 27], alpha: u8) -> Result<Self> {
        for (i, &x) in d.iter().enumerate() {
            if x > 36 {
                return Err(Error::OutOfRange(format!("D({}) = {x} > 36", i + 1)));
            }
        }
        for (j, &x) in p.iter().enumerate() {
            if x > 36 {
                return Err(Error::OutOfRange(format!("P({}) = {x} > 36", j + 1)));
            }
        }
        if !(1..=36).contains(&alpha) {
            return Err(Error::OutOfRange(format!("alpha = {alpha} not in 1..=36")));
        }
        Ok(LongTermKey { d, p, alpha })
    }

    /// `D(i)` with `i` in 1..=9.
    pub fn d(&self, i: usize) -> u8 {
        self.d[i - 1]
    }

    /// `P(j)` with `j` in 1..=27.
    pub fn p(&self, j: usize) -> u8 {
        self.p[j - 1]
    }

    /// Parse the key file format: lines `D: d1,...,d9`, `P: p1,...,p27`,
    /// `alpha: n`; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut d: Option<Vec<u8>> = None;
        let mut p: Option<Vec<u8>> = None;
        let mut alpha: Option<u8> = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tag, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad key line `{line}`")))?;
            let nums: Vec<u8> = rest
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<u8>()
                        .map_err(|e| Error::Parse(format!("bad number in `{line}`: {e}")))
                })
                .collect::<Result<_>>()?;
            match tag.trim() {
                "D" => d = Some(nums),
                "P" => p = Some(nums),
                "alpha" => {
                    if nums.len() != 1 {
                        return Err(Error::Parse("alpha line needs one value".into()));
                    }
                    alpha = Some(nums[0]);
                }
                other => return Err(Error::Parse(format!("unknown key line tag `{other}`"))),
            }
        }
        let d = d.ok_or_else(|| Error::Parse("missing D line".into()))?;
        let p = p.ok_or_else(|| Error::Parse("missing P line".into()))?;
        let alpha = alpha.ok_or_else(|| Error::Parse("missing alpha line".into()))?;
        if d.len() != 9 {
            return Err(Error::Parse(format!("D needs 9 entries, got {}", d.len())));
        }
        if p.len() != 27 {
            return Err(Error::Parse(format!("P needs 27 entries, got {}", p.len())));
        }
        Self::new(d.try_into().unwrap(), p.try_into().unwrap(), alpha)
    }

    pub fn to_file_string(&self) -> String {
        let d: Vec<String> = self.d.iter().map(u8::to_string).collect();
        let p: Vec<String> = self.p.iter().map(u8::to_string).collect();
        format!(
            "D: {}\nP: {}\nalpha: {}\n",
            d.join(","),
            p.join(","),
            self.alpha
        )
    }
}

/// Known long-term keys from the key-generator series, with extraction bits
/// chosen on the correlated lane of each key (the historical listings give
/// only D and P).
pub fn known_keys() -> Vec<(&'static str, LongTermKey)> {
    vec![
        (
            "625",
            LongTermKey::new(
                [0, 32, 24, 8, 12, 28, 36, 20, 4],
                [
                    7, 32, 33, 30, 22, 20, 5, 18, 9, 34, 35, 31, 36, 28, 21, 24, 27, 25, 26,
                    16, 4, 23, 19, 29, 8, 12, 11,
                ],
                26,
            )
            .unwrap(),
        ),
        (
            "729",
            LongTermKey::new(
                [0, 12, 16, 28, 8, 32, 36, 4, 24],
                [
                    7, 23, 33, 16, 31, 4, 5, 1, 9, 12, 14, 13, 36, 8, 21, 3, 24, 25, 32, 20,
                    2, 6, 30, 29, 28, 26, 18,
                ],
                30,
            )
            .unwrap(),
        ),
        (
            "788",
            LongTermKey::new(
                [0, 4, 36, 32, 24, 8, 12, 20, 16],
                [
                    26, 19, 33, 36, 4, 20, 5, 27, 9, 17, 2, 11, 12, 31, 21, 22, 1, 25, 7, 28,
                    16, 24, 32, 29, 8, 30, 34,
                ],
                13,
            )
            .unwrap(),
        ),
        (
            "706",
            LongTermKey::new(
                [0, 28, 8, 4, 24, 12, 16, 20, 32],
                [
                    8, 2, 33, 4, 13, 20, 5, 14, 9, 22, 30, 31, 16, 19, 21, 32, 3, 25, 28, 36,
                    27, 11, 23, 29, 12, 24, 10,
                ],
                15,
            )
            .unwrap(),
        ),
    ]
}

pub fn known_key(name: &str) -> Option<LongTermKey> {
    known_keys().into_iter().find(|(n, _)| *n == name).map(|(_, k)| k)
}

/// The 240-bit secret key, split into two 120-bit halves.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ShortTermKey {
    s1: u128,
    s2: u128,
}

impl ShortTermKey {
    /// `s1`/`s2` as 120-bit values with bit 1 at the most significant end.
    pub fn new(s1: u128, s2: u128) -> Result<Self> {
        if s1 >> 120 != 0 || s2 >> 120 != 0 {
            return Err(Error::OutOfRange("short term key halves exceed 120 bits".into()));
        }
        Ok(ShortTermKey { s1, s2 })
    }

    /// 60 hex digits: `s1` then `s2`, each 30 digits.
    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 60 {
            return Err(Error::Parse(format!(
                "short term key must be 60 hex digits, got {}",
                s.len()
            )));
        }
        let s1 = u128::from_str_radix(&s[..30], 16)
            .map_err(|e| Error::Parse(format!("bad s1 hex: {e}")))?;
        let s2 = u128::from_str_radix(&s[30..], 16)
            .map_err(|e| Error::Parse(format!("bad s2 hex: {e}")))?;
        Self::new(s1, s2)
    }

    pub fn to_hex(self) -> String {
        format!("{:030X}{:030X}", self.s1, self.s2)
    }

    /// Key bits used in round `m` (1-based): index `((m-1) mod 120) + 1`.
    pub fn round_bits(self, m: u64) -> (bool, bool) {
        let idx = ((m - 1) % 120) + 1;
        (
            (self.s1 >> (120 - idx)) & 1 == 1,
            (self.s2 >> (120 - idx)) & 1 == 1,
        )
    }
}

/// 61-bit LFSR register holding the window `f_{i-61}..f_{i-1}` (bit `k` of
/// the window is `f_{i-61+k}`). The all-zero fill is rejected.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct IvRegister {
    win: u64,
}

const IV_MASK: u64 = (1 << 61) - 1;

impl IvRegister {
    pub fn from_bits(win: u64) -> Result<Self> {
        if win & IV_MASK == 0 {
            return Err(Error::ZeroIv);
        }
        Ok(IvRegister { win: win & IV_MASK })
    }

    /// 16 hex digits, top 3 bits zero; `f_1` is the most significant of the
    /// 61 bits and lands at window bit 0.
    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 16 {
            return Err(Error::Parse(format!(
                "IV must be 16 hex digits, got {}",
                s.len()
            )));
        }
        let v = u64::from_str_radix(s, 16)
            .map_err(|e| Error::Parse(format!("bad IV hex: {e}")))?;
        if v >> 61 != 0 {
            return Err(Error::Parse("IV top 3 bits must be zero".into()));
        }
        // hex bit 60 is f_1 -> window bit 0
        let mut win = 0u64;
        for k in 0..61 {
            if (v >> (60 - k)) & 1 == 1 {
                win |= 1 << k;
            }
        }
        Self::from_bits(win)
    }

    pub fn to_hex(self) -> String {
        let mut v = 0u64;
        for k in 0..61 {
            if (self.win >> k) & 1 == 1 {
                v |= 1 << (60 - k);
            }
        }
        format!("{v:016X}")
    }

    pub fn window(self) -> u64 {
        self.win
    }

    /// Produce the next IV bit `f_i = f_{i-61} + f_{i-60} + f_{i-59} + f_{i-56}`
    /// and advance the register.
    pub fn step(&mut self) -> bool {
        let w = self.win;
        let f = (w ^ (w >> 1) ^ (w >> 2) ^ (w >> 5)) & 1;
        self.win = (w >> 1) | (f << 60);
        f == 1
    }

    /// Undo one step via the inverse recurrence
    /// `f_{i-62} = f_{i-1} + f_{i-61} + f_{i-60} + f_{i-57}`.
    pub fn step_back(&mut self) {
        let w = self.win;
        let old = ((w >> 60) ^ w ^ (w >> 1) ^ (w >> 4)) & 1;
        self.win = ((w << 1) | old) & IV_MASK;
    }

    pub fn step_back_by(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step_back();
        }
    }

    pub fn step_by(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }
}

/// Expand an IV register into the sequence `f_1..f_n`: the first 61 outputs
/// are the register contents in index order, then the recurrence applies.
pub fn iv_expand(iv: IvRegister, n: usize) -> Vec<bool> {
    IvStream::new(iv).take(n).collect()
}

/// Streaming IV expansion (same semantics as [`iv_expand`]).
#[derive(Clone, Debug)]
pub struct IvStream {
    reg: IvRegister,
    emitted: usize,
}

impl IvStream {
    pub fn new(reg: IvRegister) -> Self {
        IvStream { reg, emitted: 0 }
    }
}

impl Iterator for IvStream {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        let bit = if self.emitted < 61 {
            (self.reg.window() >> self.emitted) & 1 == 1
        } else {
            // keep a parallel register advanced past the seed window
            self.reg.step()
        };
        self.emitted += 1;
        Some(bit)
    }
}

/// Z lookup on packed inputs: index bit 0 = x0.
#[inline]
pub fn z_index(idx: usize) -> bool {
    (Z_TT >> idx) & 1 == 1
}

/// The cipher's Boolean component evaluated on six bits.
#[inline]
pub fn z(x0: bool, x1: bool, x2: bool, x3: bool, x4: bool, x5: bool) -> bool {
    let idx = x0 as usize
        | (x1 as usize) << 1
        | (x2 as usize) << 2
        | (x3 as usize) << 3
        | (x4 as usize) << 4
        | (x5 as usize) << 5;
    z_index(idx)
}

/// One application of the round function.
///
/// Fresh bits land at positions `4i-3` (`U_i`, i = 1..9); every position not
/// congruent to 1 mod 4 receives the bit one below it. `u_0` denotes the
/// current round's `s1` for any zero `D`/`P` tap.
pub fn round(state: CipherState, s1: bool, s2: bool, f: bool, key: &LongTermKey) -> CipherState {
    let u = state.0;
    let s1b = s1 as u64;
    let tap = |i: u8| -> u64 {
        if i == 0 {
            s1b
        } else {
            (u >> (i - 1)) & 1
        }
    };
    let p = &key.p;
    let v = |j: usize| tap(p[j - 1]);
    let z1 = z_index(
        (s2 as usize)
            | (v(1) as usize) << 1
            | (v(2) as usize) << 2
            | (v(3) as usize) << 3
            | (v(4) as usize) << 4
            | (v(5) as usize) << 5,
    ) as u64;
    let z2 = z_index(
        (v(7) as usize)
            | (v(8) as usize) << 1
            | (v(9) as usize) << 2
            | (v(10) as usize) << 3
            | (v(11) as usize) << 4
            | (v(12) as usize) << 5,
    ) as u64;
    let z3 = z_index(
        (v(14) as usize)
            | (v(15) as usize) << 1
            | (v(16) as usize) << 2
            | (v(17) as usize) << 3
            | (v(18) as usize) << 4
            | (v(19) as usize) << 5,
    ) as u64;
    let z4 = z_index(
        (v(21) as usize)
            | (v(22) as usize) << 1
            | (v(23) as usize) << 2
            | (v(24) as usize) << 3
            | (v(25) as usize) << 4
            | (v(26) as usize) << 5,
    ) as u64;
    let dd = |i: usize| tap(key.d[i - 1]);
    let fb = f as u64;
    let u9 = fb ^ dd(9);
    let u8_ = fb ^ z1 ^ dd(8);
    let u7 = u8_ ^ dd(8) ^ v(6) ^ dd(7);
    let u6 = u7 ^ dd(7) ^ z2 ^ dd(6);
    let u5 = u6 ^ dd(6) ^ v(13) ^ dd(5);
    let u4 = u5 ^ dd(5) ^ z3 ^ (s2 as u64) ^ dd(4);
    let u3 = u4 ^ dd(4) ^ v(20) ^ dd(3);
    let u2 = u3 ^ dd(3) ^ z4 ^ dd(2);
    let u1 = u2 ^ dd(2) ^ v(27) ^ dd(1);
    let mut out = (u << 1) & STATE_MASK;
    const FRESH_CLEAR: u64 = !(0x1111_1111_1u64 & STATE_MASK);
    out &= FRESH_CLEAR & STATE_MASK;
    out |= u1
        | u2 << 4
        | u3 << 8
        | u4 << 12
        | u5 << 16
        | u6 << 20
        | u7 << 24
        | u8_ << 28
        | u9 << 32;
    CipherState(out)
}

/// Invert one round by recovering the 27 shifted bits directly and searching
/// the 512 candidates for the consumed positions 4, 8, ..., 36.
///
/// Bijectivity is only guaranteed for KT1 keys; for other keys the search may
/// find no preimage or several, which is reported as an error.
pub fn round_inverse(
    out: CipherState,
    s1: bool,
    s2: bool,
    f: bool,
    key: &LongTermKey,
) -> Result<CipherState> {
    let mut base = 0u64;
    for j in 1..=35u64 {
        // out[j+1] = in[j] whenever j+1 is not a fresh position
        if (j + 1) % 4 != 1 {
            base |= ((out.0 >> j) & 1) << (j - 1);
        }
    }
    let mut found: Option<CipherState> = None;
    for cand in 0..512u64 {
        let mut guess = base;
        for (k, pos) in (0..9).map(|k| (k, 4 * (k + 1))) {
            guess |= ((cand >> k) & 1) << (pos - 1);
        }
        let st = CipherState(guess);
        if round(st, s1, s2, f, key) == out {
            if let Some(prev) = found {
                return Err(Error::NotBijective(format!(
                    "two preimages {} and {}",
                    prev.to_hex(),
                    st.to_hex()
                )));
            }
            found = Some(st);
        }
    }
    found.ok_or_else(|| Error::NotBijective("no preimage".into()))
}

/// Stateful keystream generator sampling bit alpha after every 127th round.
#[derive(Clone, Debug)]
pub struct Keystream {
    key: LongTermKey,
    stk: ShortTermKey,
    iv: IvStream,
    state: CipherState,
    round: u64,
}

impl Keystream {
    pub fn new(key: LongTermKey, stk: ShortTermKey, iv: IvRegister) -> Self {
        Keystream {
            key,
            stk,
            iv: IvStream::new(iv),
            state: CipherState::initial(),
        round: 0,
        }
    }

    pub fn state(&self) -> CipherState {
        self.state
    }

    /// Replace the internal state, keeping the round counter and schedules;
    /// the slide-attack simulation plants state coincidences with this.
    pub fn with_state(mut self, state: CipherState) -> Self {
        self.state = state;
        self
    }

    pub fn rounds_run(&self) -> u64 {
        self.round
    }

    /// Run one round and return the new state.
    pub fn step_round(&mut self) -> CipherState {
        self.round += 1;
        let (s1, s2) = self.stk.round_bits(self.round);
        let f = self.iv.next().unwrap();
        self.state = round(self.state, s1, s2, f, &self.key);
        self.state
    }

    /// Run 127 rounds and extract bit alpha.
    pub fn next_bit(&mut self) -> bool {
        for _ in 0..127 {
            self.step_round();
        }
        self.state.bit(self.key.alpha as usize)
    }
}

/// Keystream bits `a_1..a_count`.
pub fn keystream(key: &LongTermKey, stk: ShortTermKey, iv: IvRegister, count: usize) -> Vec<bool> {
    let mut gen = Keystream::new(key.clone(), stk, iv);
    (0..count).map(|_| gen.next_bit()).collect()
}

// ---- 5-bit character layer ----

/// Apply the fixed 5x5 recombination matrix to a row vector (bit 0 = first
/// component): `(v1..v5) -> (v2, v3, v4, v5, v1^v3)`.
#[inline]
pub fn m_apply(v: u8) -> u8 {
    ((v >> 1) & 0x0f) | ((((v) ^ (v >> 2)) & 1) << 4)
}

pub fn m_pow(mut v: u8, k: u32) -> u8 {
    for _ in 0..k {
        v = m_apply(v);
    }
    v
}

/// Rotation exponent for a 5-bit group: 0 for all-zero or all-one `r`,
/// otherwise `31 - r` where `r` is the unique exponent with
/// `R * M^r = (1,1,1,1,1)`.
pub fn rotation_exponent(r_vec: u8) -> u32 {
    let r_vec = r_vec & 0x1f;
    if r_vec == 0 || r_vec == 0x1f {
        return 0;
    }
    let mut cur = r_vec;
    for r in 0..31 {
        if cur == 0x1f {
            return (31 - r) % 31;
        }
        cur = m_apply(cur);
    }
    unreachable!("orbit of a nonzero vector always reaches all-ones");
}

/// Encrypt a sequence of 5-bit characters (values 0..=31). Each character
/// consumes 13 keystream bits: `R` from the first five, `B` from bits 7..11,
/// bits 6, 12, 13 discarded.
pub fn encrypt(
    key: &LongTermKey,
    stk: ShortTermKey,
    iv: IvRegister,
    plain: &[u8],
) -> Result<Vec<u8>> {
    char_transform(key, stk, iv, plain, true)
}

/// Inverse of [`encrypt`] under the same key material.
pub fn decrypt(
    key: &LongTermKey,
    stk: ShortTermKey,
    iv: IvRegister,
    cipher: &[u8],
) -> Result<Vec<u8>> {
    char_transform(key, stk, iv, cipher, false)
}

fn char_transform(
    key: &LongTermKey,
    stk: ShortTermKey,
    iv: IvRegister,
    data: &[u8],
    forward: bool,
) -> Result<Vec<u8>> {
    for (i, &c) in data.iter().enumerate() {
        if c > 31 {
            return Err(Error::OutOfRange(format!(
                "character {i} value {c} exceeds 31"
            )));
        }
    }
    let a = keystream(key, stk, iv, 13 * data.len());
    let mut out = Vec::with_capacity(data.len());
    for (j, &c) in data.iter().enumerate() {
        let base = 13 * j;
        let mut r_vec = 0u8;
        let mut b_vec = 0u8;
        for i in 0..5 {
            r_vec |= (a[base + i] as u8) << i;
            b_vec |= (a[base + 6 + i] as u8) << i;
        }
        let r = rotation_exponent(r_vec);
        let res = if forward {
            m_pow(c ^ b_vec, r)
        } else {
            m_pow(c, (31 - r) % 31) ^ b_vec
        };
        out.push(res);
    }
    Ok(out)
}
