//! Two-pass mini-assembler for the TI mnemonic syntax subset.
//!
//! Pass one assigns addresses and collects the symbol table; pass two encodes
//! against resolved symbols. Directives: `.org`, `.word`, `.byte`, `.entry`,
//! `.vector`, `.ipe_start`, `.ipe_end`. Labels end with `:`; `;` starts a
//! comment. Forward references are allowed to labels only.
//!
//! Emulated mnemonics (NOP, RET, POP, BR, CLR, DEC, DECD, INC, INCD, TST,
//! INV, DINT, EINT) assemble to their constant-generator forms. `PUSH #4` and
//! `PUSH #8` deliberately avoid the generator's short encoding, matching the
//! toolchain workaround for the hardware bug in those forms.

use crate::image::FirmwareImage;
use crate::isa::{self, DecodedForm, Mnemonic, Operand, Reg, Width, CG2, PC, SP, SR};
use crate::mem::IPE_ALIGN;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub struct AsmError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for AsmError {}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, AsmError> {
    Err(AsmError {
        line,
        msg: msg.into(),
    })
}

/// One assembled instruction with its source position, for ground-truth
/// comparisons and report rendering.
#[derive(Debug, Clone)]
pub struct ListingEntry {
    pub addr: u32,
    pub line: usize,
    pub text: String,
    pub form: DecodedForm,
}

#[derive(Debug)]
pub struct Assembled {
    pub image: FirmwareImage,
    pub listing: Vec<ListingEntry>,
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(i64),
    Sym(String, i64),
}

impl Expr {
    fn resolve(&self, symbols: &BTreeMap<String, u32>, line: usize) -> Result<i64, AsmError> {
        match self {
            Expr::Num(n) => Ok(*n),
            Expr::Sym(name, add) => match symbols.get(name) {
                Some(v) => Ok(*v as i64 + add),
                None => err(line, format!("unresolved label `{}`", name)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum RawOperand {
    Reg(Reg),
    Indirect(Reg),
    IndirectInc(Reg),
    Imm(Expr),
    Indexed(Expr, Reg),
    Absolute(Expr),
    /// Bare expression: symbolic mode for data ops, target for jumps/calls.
    Bare(Expr),
}

fn parse_reg(s: &str) -> Option<Reg> {
    let up = s.to_ascii_uppercase();
    match up.as_str() {
        "PC" => Some(PC),
        "SP" => Some(SP),
        "SR" => Some(SR),
        "CG2" => Some(CG2),
        _ => {
            let rest = up.strip_prefix('R')?;
            let n: u8 = rest.parse().ok()?;
            (n < 16).then_some(Reg(n))
        }
    }
}

fn parse_num(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(h, 16).ok()?
    } else {
        body.parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

fn is_sym_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn parse_expr(s: &str, line: usize) -> Result<Expr, AsmError> {
    let s = s.trim();
    if s.is_empty() {
        return err(line, "empty expression");
    }
    if let Some(n) = parse_num(s) {
        return Ok(Expr::Num(n));
    }
    if s.starts_with(is_sym_start) {
        // symbol [+|- number]
        let split = s.find(['+', '-']);
        let (name, add) = match split {
            Some(i) => {
                let (n, rest) = s.split_at(i);
                let Some(add) = parse_num(rest) else {
                    return err(line, format!("bad offset in `{}`", s));
                };
                (n.trim(), add)
            }
            None => (s, 0),
        };
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return err(line, format!("bad symbol `{}`", name));
        }
        return Ok(Expr::Sym(name.to_string(), add));
    }
    err(line, format!("cannot parse expression `{}`", s))
}

fn parse_operand(s: &str, line: usize) -> Result<RawOperand, AsmError> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix('#') {
        return Ok(RawOperand::Imm(parse_expr(rest, line)?));
    }
    if let Some(rest) = s.strip_prefix('@') {
        let (body, inc) = match rest.strip_suffix('+') {
            Some(b) => (b, true),
            None => (rest, false),
        };
        let Some(reg) = parse_reg(body.trim()) else {
            return err(line, format!("bad register `{}`", body));
        };
        return Ok(if inc {
            RawOperand::IndirectInc(reg)
        } else {
            RawOperand::Indirect(reg)
        });
    }
    if let Some(rest) = s.strip_prefix('&') {
        return Ok(RawOperand::Absolute(parse_expr(rest, line)?));
    }
    if let Some(open) = s.find('(') {
        if let Some(body) = s[open + 1..].strip_suffix(')') {
            let Some(reg) = parse_reg(body.trim()) else {
                return err(line, format!("bad register `{}`", body));
            };
            let off = if s[..open].trim().is_empty() {
                Expr::Num(0)
            } else {
                parse_expr(&s[..open], line)?
            };
            return Ok(RawOperand::Indexed(off, reg));
        }
        return err(line, format!("unterminated index `{}`", s));
    }
    if let Some(reg) = parse_reg(s) {
        return Ok(RawOperand::Reg(reg));
    }
    Ok(RawOperand::Bare(parse_expr(s, line)?))
}

/// Parsed instruction statement after alias expansion.
#[derive(Debug, Clone)]
struct Stmt {
    line: usize,
    text: String,
    mnemonic: Mnemonic,
    width: Width,
    /// Forces a full extension word for immediates that would otherwise use
    /// the constant generator (the PUSH #4/#8 workaround).
    no_cg: bool,
    operands: Vec<RawOperand>,
}

fn lookup_mnemonic(up: &str) -> Option<Mnemonic> {
    use Mnemonic::*;
    Some(match up {
        "MOV" => Mov,
        "ADD" => Add,
        "ADDC" => Addc,
        "SUBC" => Subc,
        "SUB" => Sub,
        "CMP" => Cmp,
        "DADD" => Dadd,
        "BIT" => Bit,
        "BIC" => Bic,
        "BIS" => Bis,
        "XOR" => Xor,
        "AND" => And,
        "RRC" => Rrc,
        "SWPB" => Swpb,
        "RRA" => Rra,
        "SXT" => Sxt,
        "PUSH" => Push,
        "CALL" => Call,
        "RETI" => Reti,
        "JNZ" | "JNE" => Jnz,
        "JZ" | "JEQ" => Jz,
        "JNC" | "JLO" => Jnc,
        "JC" | "JHS" => Jc,
        "JN" => Jn,
        "JGE" => Jge,
        "JL" => Jl,
        "JMP" => Jmp,
        "MOVA" => Mova,
        "CMPA" => Cmpa,
        "ADDA" => Adda,
        "SUBA" => Suba,
        "CALLA" => Calla,
        "RETA" => Reta,
        _ => return None,
    })
}

fn expand_alias(
    up: &str,
    operands: Vec<RawOperand>,
    line: usize,
) -> Result<Option<(Mnemonic, Vec<RawOperand>)>, AsmError> {
    use Mnemonic::*;
    let imm = |n: i64| RawOperand::Imm(Expr::Num(n));
    let one = |ops: Vec<RawOperand>, line| -> Result<RawOperand, AsmError> {
        let mut ops = ops;
        if ops.len() != 1 {
            return err(line, "alias takes one operand");
        }
        Ok(ops.remove(0))
    };
    Ok(Some(match up {
        "NOP" => (Mov, vec![imm(0), RawOperand::Reg(CG2)]),
        "RET" => (Mov, vec![RawOperand::IndirectInc(SP), RawOperand::Reg(PC)]),
        "POP" => (Mov, vec![RawOperand::IndirectInc(SP), one(operands, line)?]),
        "BR" => (Mov, vec![one(operands, line)?, RawOperand::Reg(PC)]),
        "CLR" => (Mov, vec![imm(0), one(operands, line)?]),
        "DEC" => (Sub, vec![imm(1), one(operands, line)?]),
        "DECD" => (Sub, vec![imm(2), one(operands, line)?]),
        "INC" => (Add, vec![imm(1), one(operands, line)?]),
        "INCD" => (Add, vec![imm(2), one(operands, line)?]),
        "TST" => (Cmp, vec![imm(0), one(operands, line)?]),
        "INV" => (Xor, vec![imm(-1), one(operands, line)?]),
        "DINT" => (Bic, vec![imm(8), RawOperand::Reg(SR)]),
        "EINT" => (Bis, vec![imm(8), RawOperand::Reg(SR)]),
        _ => return Ok(None),
    }))
}

enum Item {
    Stmt(Stmt),
    Org(i64),
    Word(Vec<Expr>),
    Byte(Vec<Expr>),
    Entry(Expr),
    Vector(String, Expr),
    IpeStart,
    IpeEnd,
    Label(String),
}

fn parse_line(line_no: usize, raw: &str, items: &mut Vec<(usize, Item)>) -> Result<(), AsmError> {
    let code = match raw.find(';') {
        Some(i) => &raw[..i],
        None => raw,
    };
    let mut rest = code.trim();
    // Leading labels.
    while let Some(colon) = rest.find(':') {
        let head = &rest[..colon];
        if head.is_empty() || !head.starts_with(is_sym_start) || head.contains(char::is_whitespace)
        {
            break;
        }
        items.push((line_no, Item::Label(head.to_string())));
        rest = rest[colon + 1..].trim();
    }
    if rest.is_empty() {
        return Ok(());
    }
    if let Some(dir) = rest.strip_prefix('.') {
        let (name, args) = match dir.find(char::is_whitespace) {
            Some(i) => (&dir[..i], dir[i..].trim()),
            None => (dir, ""),
        };
        let item = match name.to_ascii_lowercase().as_str() {
            "org" => match parse_num(args) {
                Some(a) => Item::Org(a),
                None => return err(line_no, format!("bad .org address `{}`", args)),
            },
            "word" => Item::Word(
                args.split(',')
                    .map(|a| parse_expr(a, line_no))
                    .collect::<Result<_, _>>()?,
            ),
            "byte" => Item::Byte(
                args.split(',')
                    .map(|a| parse_expr(a, line_no))
                    .collect::<Result<_, _>>()?,
            ),
            "entry" => Item::Entry(parse_expr(args, line_no)?),
            "vector" => {
                let mut parts = args.split_whitespace();
                let Some(name) = parts.next() else {
                    return err(line_no, ".vector needs a name and target");
                };
                let Some(target) = parts.next() else {
                    return err(line_no, ".vector needs a target");
                };
                Item::Vector(name.to_string(), parse_expr(target, line_no)?)
            }
            "ipe_start" => Item::IpeStart,
            "ipe_end" => Item::IpeEnd,
            other => return err(line_no, format!("unknown directive `.{}`", other)),
        };
        items.push((line_no, item));
        return Ok(());
    }
    // Instruction: mnemonic [operand[, operand]]
    let (mn_text, args) = match rest.find(char::is_whitespace) {
        Some(i) => (&rest[..i], rest[i..].trim()),
        None => (rest, ""),
    };
    let up_full = mn_text.to_ascii_uppercase();
    let (up, width) = match up_full.strip_suffix(".B") {
        Some(base) => (base.to_string(), Width::Byte),
        None => match up_full.strip_suffix(".W") {
            Some(base) => (base.to_string(), Width::Word),
            None => (up_full.clone(), Width::Word),
        },
    };
    let operands: Vec<RawOperand> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',')
            .map(|a| parse_operand(a, line_no))
            .collect::<Result<_, _>>()?
    };
    let (mnemonic, operands, no_cg) = if let Some(m) = lookup_mnemonic(&up) {
        let no_cg = m == Mnemonic::Push
            && matches!(operands.first(), Some(RawOperand::Imm(Expr::Num(4 | 8))));
        (m, operands, no_cg)
    } else if let Some((m, ops)) = expand_alias(&up, operands, line_no)? {
        (m, ops, false)
    } else {
        return err(line_no, format!("unknown mnemonic `{}`", mn_text));
    };
    let width = if matches!(
        mnemonic,
        Mnemonic::Mova
            | Mnemonic::Cmpa
            | Mnemonic::Adda
            | Mnemonic::Suba
            | Mnemonic::Calla
            | Mnemonic::Reta
    ) {
        Width::Addr
    } else {
        width
    };
    items.push((
        line_no,
        Item::Stmt(Stmt {
            line: line_no,
            text: rest.to_string(),
            mnemonic,
            width,
            no_cg,
            operands,
        }),
    ));
    Ok(())
}

fn imm_uses_cg(stmt: &Stmt, value: i64) -> bool {
    !stmt.no_cg && isa::cg_encoding(value as u32 & 0xFFFF).is_some()
}

/// Extension words a raw operand will need, decidable before resolution.
fn raw_ext_words(stmt: &Stmt, op: &RawOperand, is_jump: bool) -> u8 {
    match op {
        RawOperand::Reg(_) | RawOperand::Indirect(_) | RawOperand::IndirectInc(_) => 0,
        RawOperand::Imm(Expr::Num(n)) if imm_uses_cg(stmt, *n) => 0,
        RawOperand::Imm(_) => 1,
        RawOperand::Indexed(..) | RawOperand::Absolute(_) => 1,
        RawOperand::Bare(_) => {
            if is_jump {
                0
            } else {
                1
            }
        }
    }
}

fn stmt_size(stmt: &Stmt) -> u8 {
    use Mnemonic::*;
    let m = stmt.mnemonic;
    if m.is_jump() {
        return 2;
    }
    match m {
        Reti | Reta => 2,
        Calla => match stmt.operands.first() {
            Some(RawOperand::Reg(_) | RawOperand::Indirect(_) | RawOperand::IndirectInc(_)) => 2,
            _ => 4,
        },
        Mova | Cmpa | Adda | Suba => {
            let ext: u8 = stmt
                .operands
                .iter()
                .map(|o| match o {
                    RawOperand::Reg(_) | RawOperand::Indirect(_) | RawOperand::IndirectInc(_) => 0,
                    _ => 1,
                })
                .sum();
            2 + 2 * ext
        }
        _ => {
            let ext: u8 = stmt
                .operands
                .iter()
                .map(|o| raw_ext_words(stmt, o, false))
                .sum();
            2 + 2 * ext
        }
    }
}

fn resolve_operand(
    stmt: &Stmt,
    op: &RawOperand,
    symbols: &BTreeMap<String, u32>,
) -> Result<Operand, AsmError> {
    Ok(match op {
        RawOperand::Reg(r) => Operand::Reg(*r),
        RawOperand::Indirect(r) => Operand::Indirect(*r),
        RawOperand::IndirectInc(r) => Operand::IndirectInc(*r),
        RawOperand::Imm(e) => {
            let v = e.resolve(symbols, stmt.line)?;
            let cg = matches!(e, Expr::Num(n) if imm_uses_cg(stmt, *n));
            Operand::Imm {
                value: if stmt.width == Width::Addr {
                    v as u32 & 0xF_FFFF
                } else {
                    v as u32 & 0xFFFF
                },
                cg,
            }
        }
        RawOperand::Indexed(e, r) => Operand::Indexed {
            reg: *r,
            offset: e.resolve(symbols, stmt.line)? as i32,
        },
        RawOperand::Absolute(e) => Operand::Absolute {
            addr: e.resolve(symbols, stmt.line)? as u32 & 0xFFFF,
        },
        RawOperand::Bare(e) => Operand::Symbolic {
            addr: e.resolve(symbols, stmt.line)? as u32 & 0xFFFF,
        },
    })
}

fn build_form(
    stmt: &Stmt,
    addr: u32,
    symbols: &BTreeMap<String, u32>,
) -> Result<DecodedForm, AsmError> {
    use Mnemonic::*;
    let m = stmt.mnemonic;
    if m.is_jump() {
        let target = match stmt.operands.as_slice() {
            [RawOperand::Bare(e)] => e.resolve(symbols, stmt.line)? as u32 & 0xFFFF,
            _ => return err(stmt.line, "jump takes a label or address"),
        };
        let delta = target as i64 - (addr as i64 + 2);
        if delta % 2 != 0 || !(-1024..=1022).contains(&delta) {
            return err(
                stmt.line,
                format!(
                    "jump target 0x{:04X} out of range from 0x{:04X}",
                    target, addr
                ),
            );
        }
        return Ok(DecodedForm::jump(m, target));
    }
    match m {
        Reti => {
            if !stmt.operands.is_empty() {
                return err(stmt.line, "RETI takes no operands");
            }
            Ok(DecodedForm::reti())
        }
        Reta => Ok(DecodedForm::reta()),
        Calla => {
            let [op] = stmt.operands.as_slice() else {
                return err(stmt.line, "CALLA takes one operand");
            };
            let operand = match op {
                RawOperand::Bare(e) => Operand::Imm {
                    value: e.resolve(symbols, stmt.line)? as u32 & 0xF_FFFF,
                    cg: false,
                },
                other => resolve_operand(stmt, other, symbols)?,
            };
            Ok(DecodedForm::calla(operand))
        }
        Mova | Cmpa | Adda | Suba => {
            let [s, d] = stmt.operands.as_slice() else {
                return err(stmt.line, format!("{} takes two operands", m.name()));
            };
            let src = match resolve_operand(stmt, s, symbols)? {
                Operand::Imm { value, .. } => Operand::Imm { value, cg: false },
                other => other,
            };
            let dst = resolve_operand(stmt, d, symbols)?;
            Ok(DecodedForm::addr_op(m, src, dst))
        }
        Rrc | Swpb | Rra | Sxt | Push | Call => {
            let [op] = stmt.operands.as_slice() else {
                return err(stmt.line, format!("{} takes one operand", m.name()));
            };
            let operand = match (m, op) {
                // CALL label means CALL #label in TI syntax.
                (Call, RawOperand::Bare(e)) => Operand::Imm {
                    value: e.resolve(symbols, stmt.line)? as u32 & 0xFFFF,
                    cg: false,
                },
                _ => resolve_operand(stmt, op, symbols)?,
            };
            Ok(DecodedForm::one_op(m, stmt.width, operand))
        }
        _ => {
            let [s, d] = stmt.operands.as_slice() else {
                return err(stmt.line, format!("{} takes two operands", m.name()));
            };
            let src = resolve_operand(stmt, s, symbols)?;
            let dst = resolve_operand(stmt, d, symbols)?;
            if matches!(
                dst,
                Operand::Imm { .. } | Operand::Indirect(_) | Operand::IndirectInc(_)
            ) {
                return err(
                    stmt.line,
                    "destination must be register, indexed, symbolic or absolute",
                );
            }
            Ok(DecodedForm::two_op(m, stmt.width, src, dst))
        }
    }
}

/// Assemble a source text into a firmware image plus instruction listing.
pub fn assemble(src: &str) -> Result<Assembled, AsmError> {
    let mut items = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        parse_line(i + 1, raw, &mut items)?;
    }

    // Pass 1: addresses and symbols.
    let mut symbols: BTreeMap<String, u32> = BTreeMap::new();
    let mut label_lines: BTreeMap<String, usize> = BTreeMap::new();
    let mut addr: u32 = 0;
    let mut org_seen = false;
    let mut ipe_start: Option<u32> = None;
    let mut ipe_end: Option<u32> = None;
    for (line, item) in &items {
        match item {
            Item::Org(a) => {
                addr = *a as u32;
                org_seen = true;
            }
            Item::Label(name) => {
                if let Some(prev) = label_lines.get(name) {
                    return err(
                        *line,
                        format!("duplicate label `{}` (first defined at line {})", name, prev),
                    );
                }
                label_lines.insert(name.clone(), *line);
                symbols.insert(name.clone(), addr);
            }
            Item::Stmt(stmt) => {
                if !org_seen {
                    return err(*line, "instruction before .org");
                }
                addr += stmt_size(stmt) as u32;
            }
            Item::Word(ws) => addr += 2 * ws.len() as u32,
            Item::Byte(bs) => addr += bs.len() as u32,
            Item::IpeStart => {
                if ipe_start.is_some() {
                    return err(*line, "second .ipe_start");
                }
                ipe_start = Some(addr / IPE_ALIGN * IPE_ALIGN);
            }
            Item::IpeEnd => {
                if ipe_start.is_none() {
                    return err(*line, ".ipe_end without .ipe_start");
                }
                if ipe_end.is_some() {
                    return err(*line, "second .ipe_end");
                }
                ipe_end = Some(addr.div_ceil(IPE_ALIGN) * IPE_ALIGN);
            }
            Item::Entry(_) | Item::Vector(..) => {}
        }
    }
    if ipe_start.is_some() && ipe_end.is_none() {
        return err(src.lines().count(), ".ipe_start without .ipe_end");
    }

    // Pass 2: encode.
    let mut chunks: Vec<(usize, u32, Vec<u8>)> = Vec::new();
    let mut listing = Vec::new();
    let mut entry: Option<(usize, Expr)> = None;
    let mut vectors: Vec<(usize, String, Expr)> = Vec::new();
    let mut addr: u32 = 0;
    for (line, item) in &items {
        match item {
            Item::Org(a) => addr = *a as u32,
            Item::Label(_) | Item::IpeStart | Item::IpeEnd => {}
            Item::Entry(e) => entry = Some((*line, e.clone())),
            Item::Vector(name, e) => vectors.push((*line, name.clone(), e.clone())),
            Item::Stmt(stmt) => {
                let form = build_form(stmt, addr, &symbols)?;
                debug_assert_eq!(form.size_bytes, stmt_size(stmt));
                let words = isa::encode(&form, addr).map_err(|e| AsmError {
                    line: *line,
                    msg: e.to_string(),
                })?;
                let mut bytes = Vec::with_capacity(words.len() * 2);
                for w in &words {
                    bytes.push((w & 0xFF) as u8);
                    bytes.push((w >> 8) as u8);
                }
                listing.push(ListingEntry {
                    addr,
                    line: *line,
                    text: stmt.text.clone(),
                    form,
                });
                chunks.push((*line, addr, bytes));
                addr += form.size_bytes as u32;
            }
            Item::Word(ws) => {
                let mut bytes = Vec::with_capacity(ws.len() * 2);
                for e in ws {
                    let v = e.resolve(&symbols, *line)? as u32 & 0xFFFF;
                    bytes.push((v & 0xFF) as u8);
                    bytes.push((v >> 8) as u8);
                }
                chunks.push((*line, addr, bytes));
                addr += 2 * ws.len() as u32;
            }
            Item::Byte(bs) => {
                let mut bytes = Vec::with_capacity(bs.len());
                for e in bs {
                    bytes.push(e.resolve(&symbols, *line)? as u8);
                }
                chunks.push((*line, addr, bytes));
                addr += bs.len() as u32;
            }
        }
    }

    let entry_addr = match entry {
        Some((line, e)) => e.resolve(&symbols, line)? as u32 & 0xFFFF,
        None => chunks.iter().map(|(_, base, _)| *base).min().unwrap_or(0),
    };
    let mut vector_map = BTreeMap::new();
    for (line, name, e) in vectors {
        let v = e.resolve(&symbols, line)? as u32 & 0xFFFF;
        vector_map.insert(name, v);
    }

    let image = FirmwareImage::from_chunks(
        chunks,
        entry_addr,
        ipe_start.zip(ipe_end),
        symbols,
        vector_map,
    )
    .map_err(|(line, msg)| AsmError { line, msg })?;

    Ok(Assembled { image, listing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::decode;
    use crate::mem::Memory;

    #[test]
    fn assembles_indirect_byte_move() {
        let a = assemble("        .org 0x4400\n        MOV.B @R10, R15\n").unwrap();
        let seg = &a.image.segments[0];
        assert_eq!(seg.0, 0x4400);
        assert_eq!(seg.1.len(), 2);
        let mut m = Memory::new();
        a.image.write_to(&mut m).unwrap();
        let f = decode(&m, 0x4400).unwrap();
        assert_eq!(f, a.listing[0].form);
        assert_eq!(f.width, Width::Byte);
        assert_eq!(f.src, Some(Operand::Indirect(Reg(10))));
    }

    #[test]
    fn duplicate_label_names_both_lines() {
        let e = assemble(".org 0x4400\nfoo: NOP\nfoo: NOP\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.msg.contains("line 2"), "{}", e.msg);
    }

    #[test]
    fn unknown_mnemonic_reports_line() {
        let e = assemble(".org 0x4400\n  FROB R4\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.msg.contains("FROB"));
    }

    #[test]
    fn ipe_directives_set_bounds() {
        let a = assemble(
            "        .org 0x4400\n        .ipe_start\nf:      DINT\n        RET\n        .ipe_end\n",
        )
        .unwrap();
        let ipe = a.image.ipe.unwrap();
        assert_eq!(ipe.0, 0x4400);
        assert_eq!(ipe.1, 0x4800);
    }

    #[test]
    fn push_4_and_8_avoid_constant_generator() {
        let a = assemble(".org 0x4400\n  PUSH #8\n  PUSH #1\n").unwrap();
        assert_eq!(a.listing[0].form.size_bytes, 4);
        assert_eq!(a.listing[1].form.size_bytes, 2);
    }

    #[test]
    fn forward_references_resolve() {
        let a = assemble(".org 0x4400\n  MOV #tail, R4\n  JMP tail\ntail: RET\n").unwrap();
        let imm = a.listing[0].form.src.unwrap();
        assert_eq!(
            imm,
            Operand::Imm {
                value: a.image.symbols["tail"],
                cg: false
            }
        );
        assert_eq!(a.listing[1].form.jump_target, Some(a.image.symbols["tail"]));
    }

    #[test]
    fn aliases_expand_to_generator_forms() {
        let a = assemble(".org 0x4400\n  DEC R12\n  DINT\n  RET\n  CLR R4\n").unwrap();
        let dec = a.listing[0].form;
        assert_eq!(dec.mnemonic, Mnemonic::Sub);
        assert_eq!(dec.src, Some(Operand::Imm { value: 1, cg: true }));
        assert_eq!(dec.size_bytes, 2);
        let dint = a.listing[1].form;
        assert_eq!(dint.mnemonic, Mnemonic::Bic);
        assert_eq!(dint.dst, Some(Operand::Reg(SR)));
        let ret = a.listing[2].form;
        assert_eq!(ret.src, Some(Operand::IndirectInc(SP)));
        assert_eq!(ret.dst, Some(Operand::Reg(PC)));
    }
}
