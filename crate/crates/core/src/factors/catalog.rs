//! Fixed block catalogs: the sixteen binary orthonormal 2×2 blocks and the
//! signed-permutation family of the 4×4 Hadamard matrix.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::scalar::Real;

/// Sign pattern of a 2×2 block. `scaled` blocks carry an implicit `2^{-1/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Block2 {
    pub signs: [[i8; 2]; 2],
    pub scaled: bool,
}

impl Block2 {
    pub fn to_real<T: Real>(&self) -> [[T; 2]; 2] {
        let k = if self.scaled {
            T::FRAC_1_SQRT_2()
        } else {
            T::one()
        };
        let e = |v: i8| T::lit(v as f64) * k;
        [
            [e(self.signs[0][0]), e(self.signs[0][1])],
            [e(self.signs[1][0]), e(self.signs[1][1])],
        ]
    }

    pub fn transpose(&self) -> Self {
        let s = self.signs;
        Self {
            signs: [[s[0][0], s[1][0]], [s[0][1], s[1][1]]],
            scaled: self.scaled,
        }
    }

    pub fn det(&self) -> i32 {
        let s = self.signs;
        s[0][0] as i32 * s[1][1] as i32 - s[0][1] as i32 * s[1][0] as i32
    }
}

const fn g1(signs: [[i8; 2]; 2]) -> Block2 {
    Block2 { signs, scaled: true }
}

const fn g2(signs: [[i8; 2]; 2]) -> Block2 {
    Block2 {
        signs,
        scaled: false,
    }
}

/// The scaled ±1 blocks (positions 1..=8) followed by the signed
/// permutations (positions 9..=16, identity last).
pub const B_CATALOG: [Block2; 16] = [
    g1([[-1, 1], [1, 1]]),
    g1([[1, 1], [-1, 1]]),
    g1([[1, -1], [1, 1]]),
    g1([[1, 1], [1, -1]]),
    g1([[1, -1], [-1, -1]]),
    g1([[-1, -1], [1, -1]]),
    g1([[-1, 1], [-1, -1]]),
    g1([[-1, -1], [-1, 1]]),
    g2([[0, 1], [-1, 0]]),
    g2([[0, -1], [1, 0]]),
    g2([[1, 0], [0, -1]]),
    g2([[-1, 0], [0, 1]]),
    g2([[0, -1], [-1, 0]]),
    g2([[-1, 0], [0, -1]]),
    g2([[0, 1], [1, 0]]),
    g2([[1, 0], [0, 1]]),
];

/// Number of variants whose block is a scaled ±1 matrix.
pub const G1_COUNT: u8 = 8;
pub const IDENTITY_VARIANT: u8 = 16;
/// The coordinate swap `[[0,1],[1,0]]`.
pub const SWAP_VARIANT: u8 = 15;

/// Catalog block for a 1-based variant index.
pub fn catalog_b(variant: u8) -> Block2 {
    assert!((1..=16).contains(&variant), "B variant {variant} out of range");
    B_CATALOG[variant as usize - 1]
}

/// Variant of the transposed block.
pub fn transpose_variant(variant: u8) -> u8 {
    let t = catalog_b(variant).transpose();
    B_CATALOG.iter().position(|b| *b == t).expect("catalog is closed under transpose") as u8 + 1
}

/// The unscaled ±1 pattern used by O factors and M stages (variants 1..=8).
pub fn unscaled_g1(variant: u8) -> [[i8; 2]; 2] {
    assert!((1..=G1_COUNT).contains(&variant), "G1 variant {variant} out of range");
    B_CATALOG[variant as usize - 1].signs
}

/// Variant of the transposed unscaled G1 pattern.
pub fn g1_transpose_variant(variant: u8) -> u8 {
    let v = transpose_variant(variant);
    debug_assert!(v <= G1_COUNT);
    v
}

/// Sign pattern of `H₂ ⊗ H₂`; the orthonormal block is half of it.
pub const H4: [[i8; 4]; 4] = [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]];

pub type Signs4 = [[i8; 4]; 4];

/// Where a catalog entry came from: `side == 0` is `D_σ P_π H₄`, `side == 1` is `H₄ P_π D_σ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hadamard4Origin {
    pub side: u8,
    pub sigma: [i8; 4],
    pub pi: [usize; 4],
}

#[derive(Debug)]
pub struct Hadamard4Catalog {
    blocks: Vec<Signs4>,
    origins: Vec<Hadamard4Origin>,
    index: HashMap<Signs4, u16>,
}

impl Hadamard4Catalog {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, variant: u16) -> &Signs4 {
        &self.blocks[variant as usize]
    }

    pub fn origin(&self, variant: u16) -> Hadamard4Origin {
        self.origins[variant as usize]
    }

    pub fn blocks(&self) -> &[Signs4] {
        &self.blocks
    }

    pub fn variant_of(&self, signs: &Signs4) -> Option<u16> {
        self.index.get(signs).copied()
    }

    pub fn transpose_variant(&self, variant: u16) -> Option<u16> {
        self.variant_of(&transpose4(self.block(variant)))
    }
}

pub fn transpose4(s: &Signs4) -> Signs4 {
    let mut t = [[0; 4]; 4];
    for (r, row) in s.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            t[c][r] = v;
        }
    }
    t
}

/// All 24 permutations of `0..4` in lexicographic order.
pub fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    if p.iter().all(|&x| !std::mem::replace(&mut seen[x], true)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Sign vectors in lexicographic order, all-positive first.
pub fn sign_vectors4() -> Vec<[i8; 4]> {
    (0..16u8)
        .map(|mask| {
            let mut s = [1i8; 4];
            for (r, v) in s.iter_mut().enumerate() {
                if mask >> (3 - r) & 1 == 1 {
                    *v = -1;
                }
            }
            s
        })
        .collect()
}

/// Row `r` is `σ_r · H₄[π(r)]`.
pub fn left_candidate(sigma: [i8; 4], pi: [usize; 4]) -> Signs4 {
    let mut m = [[0; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = sigma[r] * H4[pi[r]][c];
        }
    }
    m
}

/// `H₄ · P_π · D_σ`: column `c` is `σ_c · H₄[:, π⁻¹(c)]`.
pub fn right_candidate(sigma: [i8; 4], pi: [usize; 4]) -> Signs4 {
    let mut inv = [0usize; 4];
    for (r, &p) in pi.iter().enumerate() {
        inv[p] = r;
    }
    let mut m = [[0; 4]; 4];
    for a in 0..4 {
        for c in 0..4 {
            m[a][c] = sigma[c] * H4[a][inv[c]];
        }
    }
    m
}

/// The deduplicated 4×4 Hadamard catalog, in (side, σ, π) order.
pub fn catalog_hadamard4() -> &'static Hadamard4Catalog {
    static CATALOG: OnceLock<Hadamard4Catalog> = OnceLock::new();
    CATALOG.get_or_init(|| {
        let perms = permutations4();
        let signs = sign_vectors4();
        let mut blocks = Vec::new();
        let mut origins = Vec::new();
        let mut index = HashMap::new();
        for side in 0..2u8 {
            for &sigma in &signs {
                for &pi in &perms {
                    let m = if side == 0 {
                        left_candidate(sigma, pi)
                    } else {
                        right_candidate(sigma, pi)
                    };
                    if let std::collections::hash_map::Entry::Vacant(e) = index.entry(m) {
                        e.insert(blocks.len() as u16);
                        blocks.push(m);
                        origins.push(Hadamard4Origin { side, sigma, pi });
                    }
                }
            }
        }
        Hadamard4Catalog {
            blocks,
            origins,
            index,
        }
    })
}
