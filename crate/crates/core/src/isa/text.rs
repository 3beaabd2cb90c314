//! Assembly text format: one instruction per line, operands in
//! `rd, rs1, rs2|imm` order (fields the format lacks are omitted),
//! `#` starts a comment.

use super::{encode, EncodedWord, Instruction, Mnemonic, Register};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

fn parse_register(tok: &str) -> Option<Register> {
    let rest = tok.strip_prefix('x').or_else(|| tok.strip_prefix('X'))?;
    let idx: u8 = rest.parse().ok()?;
    Register::new(idx)
}

fn parse_imm(tok: &str) -> Option<i32> {
    let (neg, body) = match tok.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, tok),
    };
    let magnitude = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        body.parse::<i64>().ok()?
    };
    let v = if neg { -magnitude } else { magnitude };
    i32::try_from(v).ok()
}

/// Parse one instruction from a single line of assembly text. The line
/// must not contain comments or labels.
pub fn parse_instruction(line: &str) -> Result<Instruction, String> {
    let mut parts = line.splitn(2, char::is_whitespace);
    let mnem_tok = parts.next().unwrap_or("");
    let m = Mnemonic::parse(mnem_tok).ok_or_else(|| format!("unknown mnemonic `{mnem_tok}`"))?;
    let rest = parts.next().unwrap_or("").trim();
    let operands: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',').map(str::trim).collect()
    };

    let f = m.format();
    let expected = [f.has_rd(), f.has_rs1(), f.has_rs2(), f.has_imm()]
        .iter()
        .filter(|&&b| b)
        .count();
    if operands.len() != expected {
        return Err(format!(
            "`{m}` takes {expected} operand(s), found {}",
            operands.len()
        ));
    }

    let mut it = operands.iter();
    let mut next_reg = |name: &str| -> Result<Register, String> {
        let tok = it.next().unwrap();
        parse_register(tok).ok_or_else(|| format!("bad {name} register `{tok}`"))
    };
    let rd = if f.has_rd() { next_reg("rd")? } else { Register::X0 };
    let rs1 = if f.has_rs1() { next_reg("rs1")? } else { Register::X0 };
    let rs2 = if f.has_rs2() { next_reg("rs2")? } else { Register::X0 };
    let imm = if f.has_imm() {
        let tok = it.next().unwrap();
        parse_imm(tok).ok_or_else(|| format!("bad immediate `{tok}`"))?
    } else {
        0
    };

    Instruction::new(m, rd, rs1, rs2, imm).map_err(|e| e.to_string())
}

/// Assemble a listing into encoded words. Blank lines and `#` comments
/// are skipped; word `i` of the result encodes line `i` of the cleaned
/// listing.
pub fn assemble(text: &str) -> Result<Vec<EncodedWord>, ParseError> {
    let mut words = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let instr =
            parse_instruction(line).map_err(|msg| ParseError::new(line_no, msg))?;
        let word = encode(&instr).map_err(|e| ParseError::new(line_no, e.to_string()))?;
        words.push(word);
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_operand_is_immediate_not_register() {
        let i = parse_instruction("slli x5, x6, 12").unwrap();
        assert_eq!(i.mnemonic, Mnemonic::Slli);
        assert_eq!(i.imm, 12);
        assert_eq!(i.rs2, Register::X0);
    }

    #[test]
    fn display_parse_roundtrip() {
        let cases = [
            "add x1, x2, x3",
            "addi x1, x0, -2048",
            "lw x4, x2, 16",
            "sw x2, x7, -4",
            "beq x1, x2, -8",
            "jal x1, 2048",
            "lui x3, -524288",
            "fence.i",
            "ecall",
        ];
        for text in cases {
            let i = parse_instruction(text).unwrap();
            assert_eq!(i.to_string(), text);
        }
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let words = assemble("# header\n\nadd x0, x0, x0 # nop-ish\n").unwrap();
        assert_eq!(words, vec![EncodedWord(0x0000_0033)]);
    }

    #[test]
    fn error_carries_line_number() {
        let err = assemble("add x0, x0, x0\nbogus x1\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("bogus"));
    }

    #[test]
    fn rejects_wrong_operand_count() {
        assert!(parse_instruction("add x1, x2").is_err());
        assert!(parse_instruction("ecall x1").is_err());
    }

    #[test]
    fn hex_immediates() {
        let i = parse_instruction("andi x1, x2, 0xff").unwrap();
        assert_eq!(i.imm, 255);
        let i = parse_instruction("addi x1, x2, -0x10").unwrap();
        assert_eq!(i.imm, -16);
    }
}
