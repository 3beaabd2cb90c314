//! Field-level token vocabulary: one token per mnemonic, one per
//! register, exact tokens for small immediates, and bucket tokens for
//! the behaviorally distinct immediate classes. Every bucket has a
//! fixed canonical value per encoding format, chosen so that
//! re-bucketing the canonical value returns the same bucket (closure).

use crate::isa::{Format, Instruction, Mnemonic, Register};

/// Token identifier; all ids are dense in `0..VOCAB_SIZE`.
pub type TokenId = u16;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const BOS: TokenId = 2;
pub const EOS: TokenId = 3;

const SPECIALS: u16 = 4;
const MNEMONIC_BASE: u16 = SPECIALS;
const REG_BASE: u16 = MNEMONIC_BASE + 49;
const IMM_EXACT_BASE: u16 = REG_BASE + 32; // 31 tokens: -15..=15
const IMM_BUCKET_BASE: u16 = IMM_EXACT_BASE + 31;

/// Largest magnitude carried by an exact immediate token.
pub const EXACT_IMM_LIMIT: i32 = 15;

/// Number of tokens in the vocabulary.
pub const VOCAB_SIZE: u16 = IMM_BUCKET_BASE + 7;

/// Immediate classes beyond the exact range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImmBucket {
    /// 16..=255.
    SmallPos,
    /// -255..=-16.
    SmallNeg,
    /// Multiple of 4096 (outside the small ranges).
    Page,
    /// The format's maximum immediate.
    Max,
    /// The format's minimum immediate (when nonzero).
    Min,
    /// Multiple of 4 (not of 4096, outside the small ranges).
    Aligned4,
    /// Everything else: a non-4-aligned wide immediate.
    Misaligned,
}

impl ImmBucket {
    pub const ALL: [ImmBucket; 7] = [
        ImmBucket::SmallPos,
        ImmBucket::SmallNeg,
        ImmBucket::Page,
        ImmBucket::Max,
        ImmBucket::Min,
        ImmBucket::Aligned4,
        ImmBucket::Misaligned,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ImmBucket::SmallPos => "small_pos",
            ImmBucket::SmallNeg => "small_neg",
            ImmBucket::Page => "page",
            ImmBucket::Max => "max",
            ImmBucket::Min => "min",
            ImmBucket::Aligned4 => "aligned4",
            ImmBucket::Misaligned => "misaligned",
        }
    }

    fn index(self) -> u16 {
        ImmBucket::ALL.iter().position(|&b| b == self).unwrap() as u16
    }
}

/// Decoded view of one token id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Pad,
    Unk,
    Bos,
    Eos,
    Mnemonic(Mnemonic),
    Reg(Register),
    /// Exact immediate in -15..=15.
    ImmExact(i32),
    ImmBucket(ImmBucket),
}

impl Token {
    pub fn id(self) -> TokenId {
        match self {
            Token::Pad => PAD,
            Token::Unk => UNK,
            Token::Bos => BOS,
            Token::Eos => EOS,
            Token::Mnemonic(m) => MNEMONIC_BASE + m.ordinal() as u16,
            Token::Reg(r) => REG_BASE + r.index() as u16,
            Token::ImmExact(v) => {
                debug_assert!((-EXACT_IMM_LIMIT..=EXACT_IMM_LIMIT).contains(&v));
                IMM_EXACT_BASE + (v + EXACT_IMM_LIMIT) as u16
            }
            Token::ImmBucket(b) => IMM_BUCKET_BASE + b.index(),
        }
    }

    pub fn from_id(id: TokenId) -> Option<Token> {
        match id {
            PAD => Some(Token::Pad),
            UNK => Some(Token::Unk),
            BOS => Some(Token::Bos),
            EOS => Some(Token::Eos),
            _ if id < REG_BASE => Some(Token::Mnemonic(
                Mnemonic::ALL[(id - MNEMONIC_BASE) as usize],
            )),
            _ if id < IMM_EXACT_BASE => {
                Some(Token::Reg(Register::new((id - REG_BASE) as u8).unwrap()))
            }
            _ if id < IMM_BUCKET_BASE => {
                Some(Token::ImmExact((id - IMM_EXACT_BASE) as i32 - EXACT_IMM_LIMIT))
            }
            _ if id < VOCAB_SIZE => {
                Some(Token::ImmBucket(ImmBucket::ALL[(id - IMM_BUCKET_BASE) as usize]))
            }
            _ => None,
        }
    }

    /// The token's string form in the vocab dump.
    pub fn text(self) -> String {
        match self {
            Token::Pad => "<pad>".into(),
            Token::Unk => "<unk>".into(),
            Token::Bos => "<bos>".into(),
            Token::Eos => "<eos>".into(),
            Token::Mnemonic(m) => m.text().into(),
            Token::Reg(r) => r.to_string(),
            Token::ImmExact(v) => format!("i{v}"),
            Token::ImmBucket(b) => b.name().into(),
        }
    }
}

/// Classify an immediate for its format. Total over every in-range
/// immediate; the mapping and its canonical representatives form a
/// closure: `bucketize(canonical_imm(t, f).unwrap(), f) == t`.
pub fn bucketize(imm: i32, f: Format) -> Token {
    let (lo, hi) = f.imm_range();
    if imm == hi {
        Token::ImmBucket(ImmBucket::Max)
    } else if imm == lo && lo != 0 {
        Token::ImmBucket(ImmBucket::Min)
    } else if (-EXACT_IMM_LIMIT..=EXACT_IMM_LIMIT).contains(&imm) {
        Token::ImmExact(imm)
    } else if (16..=255).contains(&imm) {
        Token::ImmBucket(ImmBucket::SmallPos)
    } else if (-255..=-16).contains(&imm) {
        Token::ImmBucket(ImmBucket::SmallNeg)
    } else if imm % 4096 == 0 {
        Token::ImmBucket(ImmBucket::Page)
    } else if imm % 4 == 0 {
        Token::ImmBucket(ImmBucket::Aligned4)
    } else {
        Token::ImmBucket(ImmBucket::Misaligned)
    }
}

/// Canonical immediate for a token under a format, or `None` when the
/// combination cannot produce a well-formed instruction.
pub fn canonical_imm(tok: Token, f: Format) -> Option<i32> {
    if !f.has_imm() {
        return None;
    }
    let (lo, hi) = f.imm_range();
    let fits = |v: i32| v >= lo && v <= hi && !(f.imm_must_be_even() && v % 2 != 0);
    match tok {
        Token::ImmExact(v) => fits(v).then_some(v),
        Token::ImmBucket(b) => {
            let v = match b {
                ImmBucket::SmallPos => {
                    if f == Format::IShift {
                        30
                    } else {
                        64
                    }
                }
                ImmBucket::SmallNeg => -64,
                ImmBucket::Page => 4096,
                ImmBucket::Max => hi,
                ImmBucket::Min => {
                    if lo == 0 {
                        return None; // a zero minimum is the exact token i0
                    }
                    lo
                }
                ImmBucket::Aligned4 => 1024,
                ImmBucket::Misaligned => 258,
            };
            (fits(v) && bucketize(v, f) == tok).then_some(v)
        }
        _ => None,
    }
}

/// Tokenize instructions: `<bos>`, then per instruction the mnemonic
/// followed by its present operand fields in display order, then
/// `<eos>`.
pub fn tokenize(instrs: &[Instruction]) -> Vec<TokenId> {
    let mut ids = Vec::with_capacity(2 + instrs.len() * 4);
    ids.push(BOS);
    for i in instrs {
        let f = i.mnemonic.format();
        ids.push(Token::Mnemonic(i.mnemonic).id());
        if f.has_rd() {
            ids.push(Token::Reg(i.rd).id());
        }
        if f.has_rs1() {
            ids.push(Token::Reg(i.rs1).id());
        }
        if f.has_rs2() {
            ids.push(Token::Reg(i.rs2).id());
        }
        if f.has_imm() {
            ids.push(bucketize(i.imm, f).id());
        }
    }
    ids.push(EOS);
    ids
}

/// One parsed region of a token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodedRun {
    /// A well-formed instruction run.
    Instr(Instruction),
    /// A malformed run; the count is how many tokens it consumed.
    Skipped(usize),
}

/// Total decoder over arbitrary token sequences.
///
/// Structural tokens (`<bos>`, `<eos>`, `<pad>`) are ignored. A
/// mnemonic token opens an instruction run that must supply the
/// format's operands in order; a run broken by a wrong-kind token
/// yields `Skipped` for its consumed prefix and scanning resumes at
/// the breaking token. Stray operand tokens and `<unk>` are skipped
/// one at a time. Never fails.
pub fn decode_runs(ids: &[TokenId]) -> Vec<DecodedRun> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < ids.len() {
        match Token::from_id(ids[i]) {
            None | Some(Token::Unk) => {
                out.push(DecodedRun::Skipped(1));
                i += 1;
            }
            Some(Token::Pad | Token::Bos | Token::Eos) => i += 1,
            Some(Token::Mnemonic(m)) => {
                let (run, consumed) = parse_run(m, &ids[i..]);
                out.push(run);
                i += consumed;
            }
            Some(Token::Reg(_) | Token::ImmExact(_) | Token::ImmBucket(_)) => {
                out.push(DecodedRun::Skipped(1));
                i += 1;
            }
        }
    }
    out
}

/// Parse one instruction run starting at a mnemonic token. Returns the
/// run and how many tokens it consumed (at least 1).
fn parse_run(m: Mnemonic, ids: &[TokenId]) -> (DecodedRun, usize) {
    let f = m.format();
    let mut j = 1; // past the mnemonic token
    let reg = |j: &mut usize| -> Option<Register> {
        match ids.get(*j).copied().and_then(Token::from_id) {
            Some(Token::Reg(r)) => {
                *j += 1;
                Some(r)
            }
            _ => None,
        }
    };

    let rd = if f.has_rd() {
        match reg(&mut j) {
            Some(r) => r,
            None => return (DecodedRun::Skipped(j), j),
        }
    } else {
        Register::X0
    };
    let rs1 = if f.has_rs1() {
        match reg(&mut j) {
            Some(r) => r,
            None => return (DecodedRun::Skipped(j), j),
        }
    } else {
        Register::X0
    };
    let rs2 = if f.has_rs2() {
        match reg(&mut j) {
            Some(r) => r,
            None => return (DecodedRun::Skipped(j), j),
        }
    } else {
        Register::X0
    };
    let imm = if f.has_imm() {
        match ids.get(j).copied().and_then(Token::from_id) {
            Some(tok @ (Token::ImmExact(_) | Token::ImmBucket(_))) => {
                match canonical_imm(tok, f) {
                    Some(v) => {
                        j += 1;
                        v
                    }
                    // An immediate token invalid for this format cannot
                    // start anything else: consume it with the run.
                    None => return (DecodedRun::Skipped(j + 1), j + 1),
                }
            }
            _ => return (DecodedRun::Skipped(j), j),
        }
    } else {
        0
    };

    let instr = Instruction::new(m, rd, rs1, rs2, imm)
        .expect("canonical immediates always satisfy the format");
    (DecodedRun::Instr(instr), j)
}

/// Decode a token sequence into instructions plus a skipped-token
/// count. Total: never fails on any input.
pub fn detokenize(ids: &[TokenId]) -> (Vec<Instruction>, usize) {
    let mut instrs = Vec::new();
    let mut skipped = 0;
    for run in decode_runs(ids) {
        match run {
            DecodedRun::Instr(i) => instrs.push(i),
            DecodedRun::Skipped(k) => skipped += k,
        }
    }
    (instrs, skipped)
}

/// Vocab dump as CSV: id, token, and the canonical immediate the token
/// detokenizes to under each format (`-` where not applicable).
pub fn vocab_csv() -> String {
    const FORMATS: [(Format, &str); 7] = [
        (Format::I, "i"),
        (Format::IShift, "ishift"),
        (Format::ILoad, "iload"),
        (Format::S, "s"),
        (Format::B, "b"),
        (Format::U, "u"),
        (Format::J, "j"),
    ];
    let mut out = String::from(
        "id,token,canonical_i,canonical_ishift,canonical_iload,canonical_s,canonical_b,canonical_u,canonical_j\n",
    );
    for id in 0..VOCAB_SIZE {
        let tok = Token::from_id(id).unwrap();
        out.push_str(&format!("{},{}", id, tok.text()));
        for (f, _) in FORMATS {
            match canonical_imm(tok, f) {
                Some(v) => out.push_str(&format!(",{v}")),
                None => out.push_str(",-"),
            }
        }
        out.push('\n');
    }
    out
}
