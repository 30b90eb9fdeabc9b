//! Machine-code dump model and parsers.
//!
//! Adapters may hand us either the normalized line format this module
//! serializes (`# warp-lens-disasm v1`) or the common columnar disassembler
//! layout `address: bytes  mnemonic operands` with `<symbol>:` function
//! headers. Both land in the same [`Disassembly`] shape.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineInstr {
    pub address: u64,
    pub bytes: Vec<u8>,
    pub mnemonic: String,
    pub operands: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisassembledFunction {
    /// Module function index the listing belongs to.
    pub func_index: u32,
    pub symbol: String,
    pub start_address: u64,
    pub instructions: Vec<MachineInstr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Disassembly {
    pub functions: Vec<DisassembledFunction>,
}

impl Disassembly {
    pub fn function(&self, func_index: u32) -> Option<&DisassembledFunction> {
        self.functions.iter().find(|f| f.func_index == func_index)
    }

    /// Addresses must increase strictly within each function and the start
    /// address must match the first instruction.
    fn check(self) -> Result<Disassembly> {
        for f in &self.functions {
            let mut prev: Option<u64> = None;
            for i in &f.instructions {
                if let Some(p) = prev {
                    if i.address <= p {
                        return Err(Error::DumpParseError(format!(
                            "addresses not strictly increasing in {} at {:#x}",
                            f.symbol, i.address
                        )));
                    }
                }
                prev = Some(i.address);
            }
            if let Some(first) = f.instructions.first() {
                if f.start_address != first.address {
                    return Err(Error::DumpParseError(format!(
                        "function {} starts at {:#x} but first instruction is {:#x}",
                        f.symbol, f.start_address, first.address
                    )));
                }
            }
        }
        Ok(self)
    }

    /// The normalized serialized form; re-parsing it is the identity.
    pub fn serialize_normalized(&self) -> String {
        let mut out = String::from("# warp-lens-disasm v1\n");
        for f in &self.functions {
            out.push_str(&format!(
                "func\t{}\t{:x}\t{}\n",
                f.func_index, f.start_address, f.symbol
            ));
            for i in &f.instructions {
                let bytes = if i.bytes.is_empty() {
                    "-".to_string()
                } else {
                    i.bytes.iter().map(|b| format!("{b:02x}")).collect()
                };
                let operands = if i.operands.is_empty() {
                    "-"
                } else {
                    &i.operands
                };
                out.push_str(&format!(
                    "{}\t{:x}\t{}\t{}\t{}\n",
                    f.func_index, i.address, bytes, i.mnemonic, operands
                ));
            }
        }
        out
    }
}

pub const NORMALIZED_HEADER: &str = "# warp-lens-disasm v1";

/// Parse either supported dump format, detecting by header.
pub fn parse_any(text: &str) -> Result<Disassembly> {
    if text.trim_start().starts_with(NORMALIZED_HEADER) {
        parse_normalized(text)
    } else {
        parse_columnar(text)
    }
}

pub fn parse_normalized(text: &str) -> Result<Disassembly> {
    let mut dis = Disassembly::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad =
            |what: &str| Error::DumpParseError(format!("line {}: {}: {line:?}", lineno + 1, what));
        if fields[0] == "func" {
            if fields.len() < 3 {
                return Err(bad("short func header"));
            }
            let func_index: u32 = fields[1].parse().map_err(|_| bad("bad function index"))?;
            let start_address =
                u64::from_str_radix(fields[2], 16).map_err(|_| bad("bad start address"))?;
            dis.functions.push(DisassembledFunction {
                func_index,
                symbol: fields.get(3).unwrap_or(&"").to_string(),
                start_address,
                instructions: Vec::new(),
            });
            continue;
        }
        if fields.len() < 4 {
            return Err(bad("short instruction record"));
        }
        let func_index: u32 = fields[0].parse().map_err(|_| bad("bad function index"))?;
        let address = u64::from_str_radix(fields[1], 16).map_err(|_| bad("bad address"))?;
        let bytes = if fields[2] == "-" {
            Vec::new()
        } else {
            hex_bytes(fields[2]).ok_or_else(|| bad("bad byte hex"))?
        };
        let mnemonic = fields[3].to_string();
        let operands = match fields.get(4) {
            Some(&"-") | None => String::new(),
            Some(s) => s.to_string(),
        };
        let f = match dis.functions.last_mut() {
            Some(f) if f.func_index == func_index => f,
            _ => {
                dis.functions.push(DisassembledFunction {
                    func_index,
                    symbol: String::new(),
                    start_address: address,
                    instructions: Vec::new(),
                });
                dis.functions.last_mut().unwrap()
            }
        };
        f.instructions.push(MachineInstr {
            address,
            bytes,
            mnemonic,
            operands,
        });
    }
    dis.check()
}

fn hex_bytes(s: &str) -> Option<Vec<u8>> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if !compact.len().is_multiple_of(2) {
        return None;
    }
    (0..compact.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&compact[i..i + 2], 16).ok())
        .collect()
}

fn is_hex_pair(tok: &str) -> bool {
    tok.len() == 2 && tok.chars().all(|c| c.is_ascii_hexdigit())
}

/// Trailing decimal digits of a symbol, the usual `funcN` convention.
fn index_from_symbol(symbol: &str) -> Option<u32> {
    let digits: String = symbol
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<String>()
        .chars()
        .rev()
        .collect();
    if digits.is_empty() {
        None
    } else {
        digits.parse().ok()
    }
}

/// Parse objdump-style columnar output. Unrecognized noise lines (section
/// banners, ellipses) are skipped; an input with no instructions at all is
/// an error.
pub fn parse_columnar(text: &str) -> Result<Disassembly> {
    let mut dis = Disassembly::default();
    let mut seq = 0u32;

    for raw_line in text.lines() {
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        // Function header: `0000000000000130 <func2>:`
        if let Some(stripped) = line.strip_suffix(':') {
            let mut parts = stripped.split_whitespace();
            if let (Some(addr_tok), Some(sym_tok)) = (parts.next(), parts.next()) {
                if parts.next().is_none() {
                    if let Ok(addr) = u64::from_str_radix(addr_tok, 16) {
                        let symbol = sym_tok.trim_matches(|c| c == '<' || c == '>').to_string();
                        let func_index = index_from_symbol(&symbol).unwrap_or(seq);
                        seq += 1;
                        dis.functions.push(DisassembledFunction {
                            func_index,
                            symbol,
                            start_address: addr,
                            instructions: Vec::new(),
                        });
                        continue;
                    }
                }
            }
        }
        // Instruction: `130: 41 c7 46 01 00 00 00 01  movl $0x0,0x1(%r14)`
        let Some(colon) = line.find(':') else {
            continue;
        };
        let Ok(address) = u64::from_str_radix(line[..colon].trim(), 16) else {
            continue;
        };
        let rest = &line[colon + 1..];
        let (bytes, mnemonic, operands) = split_instruction_columns(rest);
        let Some(mnemonic) = mnemonic else { continue };

        if dis.functions.is_empty() {
            dis.functions.push(DisassembledFunction {
                func_index: seq,
                symbol: String::new(),
                start_address: address,
                instructions: Vec::new(),
            });
            seq += 1;
        }
        let f = dis.functions.last_mut().unwrap();
        if f.instructions.is_empty() {
            // Headers carry padded addresses; trust the instruction stream.
            f.start_address = address;
        }
        f.instructions.push(MachineInstr {
            address,
            bytes,
            mnemonic,
            operands,
        });
    }
    if dis.functions.iter().all(|f| f.instructions.is_empty()) {
        return Err(Error::DumpParseError(
            "no instructions recognized in columnar dump".into(),
        ));
    }
    dis.check()
}

fn split_instruction_columns(rest: &str) -> (Vec<u8>, Option<String>, String) {
    // Tab-separated columns first (objdump), token scan as fallback.
    let cols: Vec<&str> = rest.split('\t').filter(|c| !c.trim().is_empty()).collect();
    if cols.len() >= 2 {
        if let Some(bytes) = hex_bytes(cols[0]) {
            let text = cols[1..].join(" ");
            let mut it = text.split_whitespace();
            let mnemonic = it.next().map(|s| s.to_string());
            let operands = it.collect::<Vec<_>>().join(" ");
            return (bytes, mnemonic, operands);
        }
    }
    let mut bytes = Vec::new();
    let mut toks = rest.split_whitespace().peekable();
    while let Some(tok) = toks.peek() {
        if is_hex_pair(tok) {
            bytes.push(u8::from_str_radix(tok, 16).unwrap());
            toks.next();
        } else {
            break;
        }
    }
    let mnemonic = toks.next().map(|s| s.to_string());
    let operands = toks.collect::<Vec<_>>().join(" ");
    (bytes, mnemonic, operands)
}
