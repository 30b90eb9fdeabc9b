//! Instruction-level vocabulary: the four numeric value types, the supported
//! instruction set, per-instruction stack signatures, and the
//! operand/operator/control classification that the mutation rules key on.

use serde::{Deserialize, Serialize};

/// The four numeric value types. Anything else in an input module (vectors,
/// references) makes the enclosing function non-mutable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataType {
    I32,
    I64,
    F32,
    F64,
}

impl DataType {
    pub fn name(self) -> &'static str {
        match self {
            DataType::I32 => "i32",
            DataType::I64 => "i64",
            DataType::F32 => "f32",
            DataType::F64 => "f64",
        }
    }
}

impl std::fmt::Display for DataType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How an instruction interacts with the operand stack: pops `params`,
/// pushes `results`. Substitution compatibility is element-wise equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorType {
    pub params: Vec<DataType>,
    pub results: Vec<DataType>,
}

impl OperatorType {
    pub fn new(params: &[DataType], results: &[DataType]) -> Self {
        OperatorType {
            params: params.to_vec(),
            results: results.to_vec(),
        }
    }
}

impl std::fmt::Display for OperatorType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |ts: &[DataType]| ts.iter().map(|t| t.name()).collect::<Vec<_>>().join(",");
        write!(f, "[{}]->[{}]", join(&self.params), join(&self.results))
    }
}

/// Mutation-relevant instruction categories. Mutually exclusive and
/// exhaustive over the supported set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstrCategory {
    /// Pushes one value without consuming any (constants, local/global reads,
    /// loads in the fused constant-address form).
    Operand,
    /// Consumes at least one stack operand.
    Operator,
    /// Control instructions plus the parametric ones the mutators never
    /// touch (select, drop, nop).
    Control,
    /// Recognized but outside the mutation rule domain (memory.size etc.).
    Other,
}

macro_rules! numeric_ops {
    ($( $variant:ident : $name:literal, $code:expr, [$($p:ident)*] => [$($r:ident)*]; )*) => {
        /// A numeric operator from the core instruction set. This is the
        /// Rule 2 substitution domain: two ops are interchangeable iff their
        /// signatures match.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum NumericOp {
            $($variant,)*
        }

        impl NumericOp {
            /// Every numeric op, in core-spec opcode order.
            pub const ALL: &'static [NumericOp] = &[$(NumericOp::$variant,)*];

            pub fn name(self) -> &'static str {
                match self { $(NumericOp::$variant => $name,)* }
            }

            /// Opcode value used for the deterministic group ordering
            /// (0xFC-prefixed ops are offset past the single-byte space).
            pub fn opcode(self) -> u32 {
                match self { $(NumericOp::$variant => $code,)* }
            }

            pub fn signature(self) -> OperatorType {
                match self {
                    $(NumericOp::$variant => OperatorType::new(
                        &[$(DataType::$p),*],
                        &[$(DataType::$r),*],
                    ),)*
                }
            }

            pub fn from_name(name: &str) -> Option<NumericOp> {
                match name {
                    $($name => Some(NumericOp::$variant),)*
                    _ => None,
                }
            }
        }

        pub(crate) fn numeric_from_parser(op: &wasmparser::Operator) -> Option<NumericOp> {
            match op {
                $(wasmparser::Operator::$variant => Some(NumericOp::$variant),)*
                _ => None,
            }
        }

        pub(crate) fn numeric_to_encoder(op: NumericOp) -> wasm_encoder::Instruction<'static> {
            match op {
                $(NumericOp::$variant => wasm_encoder::Instruction::$variant,)*
            }
        }
    };
}

numeric_ops! {
    I32Eqz: "i32.eqz", 0x45, [I32] => [I32];
    I32Eq: "i32.eq", 0x46, [I32 I32] => [I32];
    I32Ne: "i32.ne", 0x47, [I32 I32] => [I32];
    I32LtS: "i32.lt_s", 0x48, [I32 I32] => [I32];
    I32LtU: "i32.lt_u", 0x49, [I32 I32] => [I32];
    I32GtS: "i32.gt_s", 0x4A, [I32 I32] => [I32];
    I32GtU: "i32.gt_u", 0x4B, [I32 I32] => [I32];
    I32LeS: "i32.le_s", 0x4C, [I32 I32] => [I32];
    I32LeU: "i32.le_u", 0x4D, [I32 I32] => [I32];
    I32GeS: "i32.ge_s", 0x4E, [I32 I32] => [I32];
    I32GeU: "i32.ge_u", 0x4F, [I32 I32] => [I32];
    I64Eqz: "i64.eqz", 0x50, [I64] => [I32];
    I64Eq: "i64.eq", 0x51, [I64 I64] => [I32];
    I64Ne: "i64.ne", 0x52, [I64 I64] => [I32];
    I64LtS: "i64.lt_s", 0x53, [I64 I64] => [I32];
    I64LtU: "i64.lt_u", 0x54, [I64 I64] => [I32];
    I64GtS: "i64.gt_s", 0x55, [I64 I64] => [I32];
    I64GtU: "i64.gt_u", 0x56, [I64 I64] => [I32];
    I64LeS: "i64.le_s", 0x57, [I64 I64] => [I32];
    I64LeU: "i64.le_u", 0x58, [I64 I64] => [I32];
    I64GeS: "i64.ge_s", 0x59, [I64 I64] => [I32];
    I64GeU: "i64.ge_u", 0x5A, [I64 I64] => [I32];
    F32Eq: "f32.eq", 0x5B, [F32 F32] => [I32];
    F32Ne: "f32.ne", 0x5C, [F32 F32] => [I32];
    F32Lt: "f32.lt", 0x5D, [F32 F32] => [I32];
    F32Gt: "f32.gt", 0x5E, [F32 F32] => [I32];
    F32Le: "f32.le", 0x5F, [F32 F32] => [I32];
    F32Ge: "f32.ge", 0x60, [F32 F32] => [I32];
    F64Eq: "f64.eq", 0x61, [F64 F64] => [I32];
    F64Ne: "f64.ne", 0x62, [F64 F64] => [I32];
    F64Lt: "f64.lt", 0x63, [F64 F64] => [I32];
    F64Gt: "f64.gt", 0x64, [F64 F64] => [I32];
    F64Le: "f64.le", 0x65, [F64 F64] => [I32];
    F64Ge: "f64.ge", 0x66, [F64 F64] => [I32];
    I32Clz: "i32.clz", 0x67, [I32] => [I32];
    I32Ctz: "i32.ctz", 0x68, [I32] => [I32];
    I32Popcnt: "i32.popcnt", 0x69, [I32] => [I32];
    I32Add: "i32.add", 0x6A, [I32 I32] => [I32];
    I32Sub: "i32.sub", 0x6B, [I32 I32] => [I32];
    I32Mul: "i32.mul", 0x6C, [I32 I32] => [I32];
    I32DivS: "i32.div_s", 0x6D, [I32 I32] => [I32];
    I32DivU: "i32.div_u", 0x6E, [I32 I32] => [I32];
    I32RemS: "i32.rem_s", 0x6F, [I32 I32] => [I32];
    I32RemU: "i32.rem_u", 0x70, [I32 I32] => [I32];
    I32And: "i32.and", 0x71, [I32 I32] => [I32];
    I32Or: "i32.or", 0x72, [I32 I32] => [I32];
    I32Xor: "i32.xor", 0x73, [I32 I32] => [I32];
    I32Shl: "i32.shl", 0x74, [I32 I32] => [I32];
    I32ShrS: "i32.shr_s", 0x75, [I32 I32] => [I32];
    I32ShrU: "i32.shr_u", 0x76, [I32 I32] => [I32];
    I32Rotl: "i32.rotl", 0x77, [I32 I32] => [I32];
    I32Rotr: "i32.rotr", 0x78, [I32 I32] => [I32];
    I64Clz: "i64.clz", 0x79, [I64] => [I64];
    I64Ctz: "i64.ctz", 0x7A, [I64] => [I64];
    I64Popcnt: "i64.popcnt", 0x7B, [I64] => [I64];
    I64Add: "i64.add", 0x7C, [I64 I64] => [I64];
    I64Sub: "i64.sub", 0x7D, [I64 I64] => [I64];
    I64Mul: "i64.mul", 0x7E, [I64 I64] => [I64];
    I64DivS: "i64.div_s", 0x7F, [I64 I64] => [I64];
    I64DivU: "i64.div_u", 0x80, [I64 I64] => [I64];
    I64RemS: "i64.rem_s", 0x81, [I64 I64] => [I64];
    I64RemU: "i64.rem_u", 0x82, [I64 I64] => [I64];
    I64And: "i64.and", 0x83, [I64 I64] => [I64];
    I64Or: "i64.or", 0x84, [I64 I64] => [I64];
    I64Xor: "i64.xor", 0x85, [I64 I64] => [I64];
    I64Shl: "i64.shl", 0x86, [I64 I64] => [I64];
    I64ShrS: "i64.shr_s", 0x87, [I64 I64] => [I64];
    I64ShrU: "i64.shr_u", 0x88, [I64 I64] => [I64];
    I64Rotl: "i64.rotl", 0x89, [I64 I64] => [I64];
    I64Rotr: "i64.rotr", 0x8A, [I64 I64] => [I64];
    F32Abs: "f32.abs", 0x8B, [F32] => [F32];
    F32Neg: "f32.neg", 0x8C, [F32] => [F32];
    F32Ceil: "f32.ceil", 0x8D, [F32] => [F32];
    F32Floor: "f32.floor", 0x8E, [F32] => [F32];
    F32Trunc: "f32.trunc", 0x8F, [F32] => [F32];
    F32Nearest: "f32.nearest", 0x90, [F32] => [F32];
    F32Sqrt: "f32.sqrt", 0x91, [F32] => [F32];
    F32Add: "f32.add", 0x92, [F32 F32] => [F32];
    F32Sub: "f32.sub", 0x93, [F32 F32] => [F32];
    F32Mul: "f32.mul", 0x94, [F32 F32] => [F32];
    F32Div: "f32.div", 0x95, [F32 F32] => [F32];
    F32Min: "f32.min", 0x96, [F32 F32] => [F32];
    F32Max: "f32.max", 0x97, [F32 F32] => [F32];
    F32Copysign: "f32.copysign", 0x98, [F32 F32] => [F32];
    F64Abs: "f64.abs", 0x99, [F64] => [F64];
    F64Neg: "f64.neg", 0x9A, [F64] => [F64];
    F64Ceil: "f64.ceil", 0x9B, [F64] => [F64];
    F64Floor: "f64.floor", 0x9C, [F64] => [F64];
    F64Trunc: "f64.trunc", 0x9D, [F64] => [F64];
    F64Nearest: "f64.nearest", 0x9E, [F64] => [F64];
    F64Sqrt: "f64.sqrt", 0x9F, [F64] => [F64];
    F64Add: "f64.add", 0xA0, [F64 F64] => [F64];
    F64Sub: "f64.sub", 0xA1, [F64 F64] => [F64];
    F64Mul: "f64.mul", 0xA2, [F64 F64] => [F64];
    F64Div: "f64.div", 0xA3, [F64 F64] => [F64];
    F64Min: "f64.min", 0xA4, [F64 F64] => [F64];
    F64Max: "f64.max", 0xA5, [F64 F64] => [F64];
    F64Copysign: "f64.copysign", 0xA6, [F64 F64] => [F64];
    I32WrapI64: "i32.wrap_i64", 0xA7, [I64] => [I32];
    I32TruncF32S: "i32.trunc_f32_s", 0xA8, [F32] => [I32];
    I32TruncF32U: "i32.trunc_f32_u", 0xA9, [F32] => [I32];
    I32TruncF64S: "i32.trunc_f64_s", 0xAA, [F64] => [I32];
    I32TruncF64U: "i32.trunc_f64_u", 0xAB, [F64] => [I32];
    I64ExtendI32S: "i64.extend_i32_s", 0xAC, [I32] => [I64];
    I64ExtendI32U: "i64.extend_i32_u", 0xAD, [I32] => [I64];
    I64TruncF32S: "i64.trunc_f32_s", 0xAE, [F32] => [I64];
    I64TruncF32U: "i64.trunc_f32_u", 0xAF, [F32] => [I64];
    I64TruncF64S: "i64.trunc_f64_s", 0xB0, [F64] => [I64];
    I64TruncF64U: "i64.trunc_f64_u", 0xB1, [F64] => [I64];
    F32ConvertI32S: "f32.convert_i32_s", 0xB2, [I32] => [F32];
    F32ConvertI32U: "f32.convert_i32_u", 0xB3, [I32] => [F32];
    F32ConvertI64S: "f32.convert_i64_s", 0xB4, [I64] => [F32];
    F32ConvertI64U: "f32.convert_i64_u", 0xB5, [I64] => [F32];
    F32DemoteF64: "f32.demote_f64", 0xB6, [F64] => [F32];
    F64ConvertI32S: "f64.convert_i32_s", 0xB7, [I32] => [F64];
    F64ConvertI32U: "f64.convert_i32_u", 0xB8, [I32] => [F64];
    F64ConvertI64S: "f64.convert_i64_s", 0xB9, [I64] => [F64];
    F64ConvertI64U: "f64.convert_i64_u", 0xBA, [I64] => [F64];
    F64PromoteF32: "f64.promote_f32", 0xBB, [F32] => [F64];
    I32ReinterpretF32: "i32.reinterpret_f32", 0xBC, [F32] => [I32];
    I64ReinterpretF64: "i64.reinterpret_f64", 0xBD, [F64] => [I64];
    F32ReinterpretI32: "f32.reinterpret_i32", 0xBE, [I32] => [F32];
    F64ReinterpretI64: "f64.reinterpret_i64", 0xBF, [I64] => [F64];
    I32Extend8S: "i32.extend8_s", 0xC0, [I32] => [I32];
    I32Extend16S: "i32.extend16_s", 0xC1, [I32] => [I32];
    I64Extend8S: "i64.extend8_s", 0xC2, [I64] => [I64];
    I64Extend16S: "i64.extend16_s", 0xC3, [I64] => [I64];
    I64Extend32S: "i64.extend32_s", 0xC4, [I64] => [I64];
    I32TruncSatF32S: "i32.trunc_sat_f32_s", 0xFC00, [F32] => [I32];
    I32TruncSatF32U: "i32.trunc_sat_f32_u", 0xFC01, [F32] => [I32];
    I32TruncSatF64S: "i32.trunc_sat_f64_s", 0xFC02, [F64] => [I32];
    I32TruncSatF64U: "i32.trunc_sat_f64_u", 0xFC03, [F64] => [I32];
    I64TruncSatF32S: "i64.trunc_sat_f32_s", 0xFC04, [F32] => [I64];
    I64TruncSatF32U: "i64.trunc_sat_f32_u", 0xFC05, [F32] => [I64];
    I64TruncSatF64S: "i64.trunc_sat_f64_s", 0xFC06, [F64] => [I64];
    I64TruncSatF64U: "i64.trunc_sat_f64_u", 0xFC07, [F64] => [I64];
}

macro_rules! mem_ops {
    ($enum_name:ident, $to_fn:ident,
     $( $variant:ident : $name:literal, $value_ty:ident, $natural_align:expr; )*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $enum_name {
            $($variant,)*
        }

        impl $enum_name {
            pub fn name(self) -> &'static str {
                match self { $($enum_name::$variant => $name,)* }
            }

            /// The numeric type moved between the stack and memory.
            pub fn value_type(self) -> DataType {
                match self { $($enum_name::$variant => DataType::$value_ty,)* }
            }

            /// log2 of the natural alignment in bytes.
            pub fn natural_align(self) -> u32 {
                match self { $($enum_name::$variant => $natural_align,)* }
            }
        }

        pub(crate) fn $to_fn(op: $enum_name, arg: MemArg) -> wasm_encoder::Instruction<'static> {
            let m = wasm_encoder::MemArg {
                offset: arg.offset,
                align: arg.align_log,
                memory_index: 0,
            };
            match op {
                $($enum_name::$variant => wasm_encoder::Instruction::$variant(m),)*
            }
        }
    };
}

mem_ops! {
    LoadOp, load_to_encoder,
    I32Load: "i32.load", I32, 2;
    I64Load: "i64.load", I64, 3;
    F32Load: "f32.load", F32, 2;
    F64Load: "f64.load", F64, 3;
    I32Load8S: "i32.load8_s", I32, 0;
    I32Load8U: "i32.load8_u", I32, 0;
    I32Load16S: "i32.load16_s", I32, 1;
    I32Load16U: "i32.load16_u", I32, 1;
    I64Load8S: "i64.load8_s", I64, 0;
    I64Load8U: "i64.load8_u", I64, 0;
    I64Load16S: "i64.load16_s", I64, 1;
    I64Load16U: "i64.load16_u", I64, 1;
    I64Load32S: "i64.load32_s", I64, 2;
    I64Load32U: "i64.load32_u", I64, 2;
}

mem_ops! {
    StoreOp, store_to_encoder,
    I32Store: "i32.store", I32, 2;
    I64Store: "i64.store", I64, 3;
    F32Store: "f32.store", F32, 2;
    F64Store: "f64.store", F64, 3;
    I32Store8: "i32.store8", I32, 0;
    I32Store16: "i32.store16", I32, 1;
    I64Store8: "i64.store8", I64, 0;
    I64Store16: "i64.store16", I64, 1;
    I64Store32: "i64.store32", I64, 2;
}

/// Memory access immediate. `align_log` is log2 of the alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemArg {
    pub align_log: u32,
    pub offset: u64,
}

/// Structured block type immediate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Empty,
    Value(DataType),
    /// Index into the type section (multi-value blocks).
    Func(u32),
}

/// The supported instruction set: the four-numeric-type core plus the
/// control/memory/variable plumbing needed to re-encode and interpret
/// whole function bodies. Anything a module uses beyond this flags the
/// enclosing function as non-mutable.
#[derive(Debug, Clone, PartialEq)]
pub enum Instr {
    I32Const(i32),
    I64Const(i64),
    /// Bit pattern, so NaN payloads round-trip exactly.
    F32Const(u32),
    F64Const(u64),
    LocalGet(u32),
    LocalSet(u32),
    LocalTee(u32),
    GlobalGet(u32),
    GlobalSet(u32),
    Load(LoadOp, MemArg),
    Store(StoreOp, MemArg),
    MemorySize,
    MemoryGrow,
    MemoryCopy,
    MemoryFill,
    Numeric(NumericOp),
    Drop,
    Select,
    Unreachable,
    Nop,
    Block(BlockKind),
    Loop(BlockKind),
    If(BlockKind),
    Else,
    End,
    Br(u32),
    BrIf(u32),
    BrTable(Vec<u32>, u32),
    Return,
    Call(u32),
    CallIndirect {
        type_index: u32,
        table_index: u32,
    },
}

impl Instr {
    /// Mnemonic without immediates.
    pub fn opcode_name(&self) -> &'static str {
        match self {
            Instr::I32Const(_) => "i32.const",
            Instr::I64Const(_) => "i64.const",
            Instr::F32Const(_) => "f32.const",
            Instr::F64Const(_) => "f64.const",
            Instr::LocalGet(_) => "local.get",
            Instr::LocalSet(_) => "local.set",
            Instr::LocalTee(_) => "local.tee",
            Instr::GlobalGet(_) => "global.get",
            Instr::GlobalSet(_) => "global.set",
            Instr::Load(op, _) => op.name(),
            Instr::Store(op, _) => op.name(),
            Instr::MemorySize => "memory.size",
            Instr::MemoryGrow => "memory.grow",
            Instr::MemoryCopy => "memory.copy",
            Instr::MemoryFill => "memory.fill",
            Instr::Numeric(op) => op.name(),
            Instr::Drop => "drop",
            Instr::Select => "select",
            Instr::Unreachable => "unreachable",
            Instr::Nop => "nop",
            Instr::Block(_) => "block",
            Instr::Loop(_) => "loop",
            Instr::If(_) => "if",
            Instr::Else => "else",
            Instr::End => "end",
            Instr::Br(_) => "br",
            Instr::BrIf(_) => "br_if",
            Instr::BrTable(_, _) => "br_table",
            Instr::Return => "return",
            Instr::Call(_) => "call",
            Instr::CallIndirect { .. } => "call_indirect",
        }
    }

    /// Textual form, roughly the wat rendering of the single instruction.
    pub fn text(&self) -> String {
        match self {
            Instr::I32Const(v) => format!("i32.const {v}"),
            Instr::I64Const(v) => format!("i64.const {v}"),
            Instr::F32Const(bits) => format!("f32.const {}", render_f32(*bits)),
            Instr::F64Const(bits) => format!("f64.const {}", render_f64(*bits)),
            Instr::LocalGet(k) => format!("local.get {k}"),
            Instr::LocalSet(k) => format!("local.set {k}"),
            Instr::LocalTee(k) => format!("local.tee {k}"),
            Instr::GlobalGet(k) => format!("global.get {k}"),
            Instr::GlobalSet(k) => format!("global.set {k}"),
            Instr::Load(op, arg) => render_mem(op.name(), *arg, op.natural_align()),
            Instr::Store(op, arg) => render_mem(op.name(), *arg, op.natural_align()),
            Instr::Block(bt) | Instr::Loop(bt) | Instr::If(bt) => {
                let head = self.opcode_name();
                match bt {
                    BlockKind::Empty => head.to_string(),
                    BlockKind::Value(t) => format!("{head} (result {t})"),
                    BlockKind::Func(idx) => format!("{head} (type {idx})"),
                }
            }
            Instr::Br(l) => format!("br {l}"),
            Instr::BrIf(l) => format!("br_if {l}"),
            Instr::BrTable(targets, default) => {
                let mut s = String::from("br_table");
                for t in targets {
                    s.push_str(&format!(" {t}"));
                }
                s.push_str(&format!(" {default}"));
                s
            }
            Instr::Call(f) => format!("call {f}"),
            Instr::CallIndirect { type_index, .. } => format!("call_indirect (type {type_index})"),
            _ => self.opcode_name().to_string(),
        }
    }

    /// The type a lone operand instruction pushes. `None` for non-operands
    /// and for loads (their operand role depends on fusion).
    pub fn const_or_read_type(&self) -> Option<DataType> {
        match self {
            Instr::I32Const(_) => Some(DataType::I32),
            Instr::I64Const(_) => Some(DataType::I64),
            Instr::F32Const(_) => Some(DataType::F32),
            Instr::F64Const(_) => Some(DataType::F64),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        self.const_or_read_type().is_some()
    }
}

fn render_f32(bits: u32) -> String {
    let v = f32::from_bits(bits);
    if v.is_nan() {
        format!("nan:0x{:x}", bits & 0x7f_ffff)
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

fn render_f64(bits: u64) -> String {
    let v = f64::from_bits(bits);
    if v.is_nan() {
        format!("nan:0x{:x}", bits & 0xf_ffff_ffff_ffff)
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

fn render_mem(name: &str, arg: MemArg, natural_align: u32) -> String {
    let mut s = name.to_string();
    if arg.offset != 0 {
        s.push_str(&format!(" offset={}", arg.offset));
    }
    if arg.align_log != natural_align {
        s.push_str(&format!(" align={}", 1u64 << arg.align_log));
    }
    s
}

/// Make a `t.const` instruction holding `value` coerced into type `ty`.
/// Used for the immediate pool and Rule 3 restoration constants.
pub fn const_of(ty: DataType, value: PoolValue) -> Instr {
    match (ty, value) {
        (DataType::I32, PoolValue::Int(v)) => Instr::I32Const(v as i32),
        (DataType::I64, PoolValue::Int(v)) => Instr::I64Const(v),
        (DataType::F32, PoolValue::Int(v)) => Instr::F32Const((v as f32).to_bits()),
        (DataType::F64, PoolValue::Int(v)) => Instr::F64Const((v as f64).to_bits()),
        (DataType::I32, PoolValue::Float(v)) => Instr::I32Const(v as i32),
        (DataType::I64, PoolValue::Float(v)) => Instr::I64Const(v as i64),
        (DataType::F32, PoolValue::Float(v)) => Instr::F32Const((v as f32).to_bits()),
        (DataType::F64, PoolValue::Float(v)) => Instr::F64Const(v.to_bits()),
    }
}

/// A pool constant before coercion into a concrete numeric type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoolValue {
    Int(i64),
    Float(f64),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_table_is_in_opcode_order() {
        let codes: Vec<u32> = NumericOp::ALL.iter().map(|op| op.opcode()).collect();
        let mut sorted = codes.clone();
        sorted.sort_unstable();
        assert_eq!(codes, sorted);
        assert_eq!(codes.len(), 136);
    }

    #[test]
    fn i64_eq_signature() {
        let sig = NumericOp::I64Eq.signature();
        assert_eq!(sig.params, vec![DataType::I64, DataType::I64]);
        assert_eq!(sig.results, vec![DataType::I32]);
    }

    #[test]
    fn instruction_text() {
        assert_eq!(Instr::I32Const(-65537).text(), "i32.const -65537");
        assert_eq!(Instr::F64Const(1.0f64.to_bits()).text(), "f64.const 1");
        assert_eq!(
            Instr::Load(
                LoadOp::I64Load,
                MemArg {
                    align_log: 3,
                    offset: 8
                }
            )
            .text(),
            "i64.load offset=8"
        );
        assert_eq!(
            Instr::Load(
                LoadOp::I32Load,
                MemArg {
                    align_log: 0,
                    offset: 0
                }
            )
            .text(),
            "i32.load align=1"
        );
        assert_eq!(Instr::BrTable(vec![0, 1], 2).text(), "br_table 0 1 2");
    }
}
