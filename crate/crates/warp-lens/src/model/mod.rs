//! A typed, position-indexed view of a Wasm module's function bodies.
//!
//! Parsing keeps every section of the input verbatim; only the code section
//! is rebuilt from the instruction records on re-encode, so everything the
//! model does not understand survives a round trip untouched. Functions that
//! use constructs outside the four-numeric-type core are kept as raw bytes
//! and flagged non-mutable.

mod groups;
mod instr;

pub use groups::{substitution_candidates, substitution_group};
pub use instr::{
    const_of, BlockKind, DataType, Instr, InstrCategory, LoadOp, MemArg, NumericOp, OperatorType,
    PoolValue, StoreOp,
};

use crate::error::{Error, Result};
use wasmparser::{Parser, Payload};

/// One classified instruction at a fixed position in a function body.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrRecord {
    /// Ordinal within the function body (the function-final `end` is not
    /// part of the record list).
    pub offset: usize,
    pub instr: Instr,
    pub category: InstrCategory,
    /// Present exactly on Operator records.
    pub signature: Option<OperatorType>,
    /// Present exactly on Operand records: the single type pushed.
    pub operand_result: Option<DataType>,
    pub fused_role: FusedRole,
}

/// Role of a record inside the fused `i32.const addr; t.load` operand form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusedRole {
    None,
    /// The address constant consumed by the following load.
    AddressConst,
    /// A load whose address is the immediately preceding constant.
    FusedLoad,
}

#[derive(Debug, Clone)]
pub struct FunctionBody {
    /// Index in the module function index space (imports first).
    pub func_index: u32,
    pub type_index: u32,
    pub param_count: usize,
    /// Parameters first, then declared locals. Only meaningful when `mutable`.
    pub locals: Vec<DataType>,
    pub instructions: Vec<InstrRecord>,
    /// False when the body (or its locals) uses constructs outside the
    /// supported core subset; such functions are re-encoded from `raw`.
    pub mutable: bool,
    pub(crate) raw: Vec<u8>,
}

impl FunctionBody {
    pub fn local_type(&self, idx: u32) -> Option<DataType> {
        self.locals.get(idx as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Func,
    Table,
    Memory,
    Global,
    Other,
}

#[derive(Debug, Clone)]
pub struct Export {
    pub name: String,
    pub kind: ExportKind,
    pub index: u32,
}

/// A constant initializer expression (globals, active segment offsets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitExpr {
    I32(i32),
    I64(i64),
    F32(u32),
    F64(u64),
    GlobalGet(u32),
    Unsupported,
}

#[derive(Debug, Clone)]
pub struct GlobalInfo {
    /// None when the content type is outside the four numeric types.
    pub ty: Option<DataType>,
    pub mutable: bool,
    /// None for imported globals.
    pub init: Option<InitExpr>,
}

#[derive(Debug, Clone, Copy)]
pub struct MemoryLimits {
    pub min_pages: u64,
    pub max_pages: Option<u64>,
    pub is_64: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct TableInfo {
    pub min: u64,
    pub max: Option<u64>,
    pub funcref: bool,
}

#[derive(Debug, Clone)]
pub struct ElemSegment {
    pub table: u32,
    pub offset: InitExpr,
    pub funcs: Vec<u32>,
    pub active: bool,
}

#[derive(Debug, Clone)]
pub struct DataSegment {
    pub memory: u32,
    pub offset: InitExpr,
    pub bytes: Vec<u8>,
    pub active: bool,
}

#[derive(Debug, Clone)]
pub struct FuncSig {
    pub params: Vec<DataType>,
    pub results: Vec<DataType>,
}

#[derive(Debug, Clone)]
pub(crate) enum SectionEntry {
    Raw { id: u8, bytes: Vec<u8> },
    Code,
}

/// The indexed module model.
#[derive(Debug, Clone)]
pub struct InstructionModel {
    pub(crate) sections: Vec<SectionEntry>,
    /// Type section entries; None for non-function or non-numeric types.
    pub types: Vec<Option<FuncSig>>,
    pub num_imported_funcs: u32,
    pub imported_func_types: Vec<u32>,
    /// Full global index space: imports first.
    pub globals: Vec<GlobalInfo>,
    pub memories: Vec<MemoryLimits>,
    pub tables: Vec<TableInfo>,
    pub exports: Vec<Export>,
    pub start: Option<u32>,
    pub elements: Vec<ElemSegment>,
    pub data: Vec<DataSegment>,
    /// Defined functions in definition order.
    pub functions: Vec<FunctionBody>,
    /// True when the module carries imports or segments the mock runtime
    /// cannot instantiate (function imports, passive segments, expression
    /// element items).
    pub needs_host: bool,
}

impl InstructionModel {
    pub fn function_by_index(&self, module_func_index: u32) -> Option<&FunctionBody> {
        let pos = module_func_index.checked_sub(self.num_imported_funcs)? as usize;
        self.functions.get(pos)
    }

    pub fn func_sig(&self, module_func_index: u32) -> Option<&FuncSig> {
        let ty = if module_func_index < self.num_imported_funcs {
            *self.imported_func_types.get(module_func_index as usize)?
        } else {
            self.function_by_index(module_func_index)?.type_index
        };
        self.types.get(ty as usize)?.as_ref()
    }

    pub fn export_func(&self, name: &str) -> Option<u32> {
        self.exports
            .iter()
            .find(|e| e.kind == ExportKind::Func && e.name == name)
            .map(|e| e.index)
    }

    /// Structural equality over the parsed view, ignoring raw byte layout.
    /// This is the round-trip oracle: parse∘encode∘parse must agree with
    /// parse under this relation.
    pub fn structural_eq(&self, other: &InstructionModel) -> bool {
        fn body_eq(a: &FunctionBody, b: &FunctionBody) -> bool {
            a.func_index == b.func_index
                && a.type_index == b.type_index
                && a.mutable == b.mutable
                && if a.mutable {
                    a.param_count == b.param_count
                        && a.locals == b.locals
                        && a.instructions == b.instructions
                } else {
                    a.raw == b.raw
                }
        }
        self.functions.len() == other.functions.len()
            && self
                .functions
                .iter()
                .zip(&other.functions)
                .all(|(a, b)| body_eq(a, b))
            && self.num_imported_funcs == other.num_imported_funcs
            && self.exports.len() == other.exports.len()
            && self.start == other.start
            && self.globals.len() == other.globals.len()
    }
}

fn data_type_of(ty: wasmparser::ValType) -> Option<DataType> {
    match ty {
        wasmparser::ValType::I32 => Some(DataType::I32),
        wasmparser::ValType::I64 => Some(DataType::I64),
        wasmparser::ValType::F32 => Some(DataType::F32),
        wasmparser::ValType::F64 => Some(DataType::F64),
        _ => None,
    }
}

fn malformed(e: wasmparser::BinaryReaderError) -> Error {
    Error::MalformedBinary {
        offset: e.offset(),
        message: e.message().to_string(),
    }
}

fn parse_init_expr(expr: &wasmparser::ConstExpr) -> InitExpr {
    let mut reader = expr.get_operators_reader();
    let mut out = InitExpr::Unsupported;
    let mut count = 0;
    loop {
        let op = match reader.read() {
            Ok(op) => op,
            Err(_) => return InitExpr::Unsupported,
        };
        match op {
            wasmparser::Operator::End => break,
            wasmparser::Operator::I32Const { value } => out = InitExpr::I32(value),
            wasmparser::Operator::I64Const { value } => out = InitExpr::I64(value),
            wasmparser::Operator::F32Const { value } => out = InitExpr::F32(value.bits()),
            wasmparser::Operator::F64Const { value } => out = InitExpr::F64(value.bits()),
            wasmparser::Operator::GlobalGet { global_index } => {
                out = InitExpr::GlobalGet(global_index)
            }
            _ => return InitExpr::Unsupported,
        }
        count += 1;
        if count > 1 {
            return InitExpr::Unsupported;
        }
    }
    out
}

/// Parse a Wasm binary into the indexed model.
///
/// Functions using constructs beyond the supported core subset are flagged
/// non-mutable and carried as raw bytes; everything still re-encodes.
pub fn parse_module(bytes: &[u8]) -> Result<InstructionModel> {
    let mut model = InstructionModel {
        sections: Vec::new(),
        types: Vec::new(),
        num_imported_funcs: 0,
        imported_func_types: Vec::new(),
        globals: Vec::new(),
        memories: Vec::new(),
        tables: Vec::new(),
        exports: Vec::new(),
        start: None,
        elements: Vec::new(),
        data: Vec::new(),
        functions: Vec::new(),
        needs_host: false,
    };
    let mut func_type_indices: Vec<u32> = Vec::new();
    let mut next_defined_func = 0u32;

    let raw = |range: std::ops::Range<usize>| bytes[range].to_vec();

    for payload in Parser::new(0).parse_all(bytes) {
        let payload = payload.map_err(malformed)?;
        match payload {
            Payload::Version { .. } | Payload::End(_) => {}
            Payload::TypeSection(r) => {
                model.sections.push(SectionEntry::Raw {
                    id: 1,
                    bytes: raw(r.range()),
                });
                for group in r {
                    for sub in group.map_err(malformed)?.into_types() {
                        let sig = match &sub.composite_type.inner {
                            wasmparser::CompositeInnerType::Func(f) => {
                                let params: Option<Vec<_>> =
                                    f.params().iter().map(|t| data_type_of(*t)).collect();
                                let results: Option<Vec<_>> =
                                    f.results().iter().map(|t| data_type_of(*t)).collect();
                                match (params, results) {
                                    (Some(params), Some(results)) => {
                                        Some(FuncSig { params, results })
                                    }
                                    _ => None,
                                }
                            }
                            _ => None,
                        };
                        model.types.push(sig);
                    }
                }
            }
            Payload::ImportSection(r) => {
                model.sections.push(SectionEntry::Raw {
                    id: 2,
                    bytes: raw(r.range()),
                });
                for import in r {
                    let import = import.map_err(malformed)?;
                    match import.ty {
                        wasmparser::TypeRef::Func(ty) => {
                            model.num_imported_funcs += 1;
                            model.imported_func_types.push(ty);
                            model.needs_host = true;
                        }
                        wasmparser::TypeRef::Global(g) => {
                            model.globals.push(GlobalInfo {
                                ty: data_type_of(g.content_type),
                                mutable: g.mutable,
                                init: None,
                            });
                            model.needs_host = true;
                        }
                        wasmparser::TypeRef::Memory(m) => {
                            model.memories.push(MemoryLimits {
                                min_pages: m.initial,
                                max_pages: m.maximum,
                                is_64: m.memory64,
                            });
                            model.needs_host = true;
                        }
                        wasmparser::TypeRef::Table(t) => {
                            model.tables.push(TableInfo {
                                min: t.initial,
                                max: t.maximum,
                                funcref: t.element_type.is_func_ref(),
                            });
                            model.needs_host = true;
                        }
                        wasmparser::TypeRef::Tag(_) => {
                            model.needs_host = true;
                        }
                    }
                }
            }
            Payload::FunctionSection(r) => {
                model.sections.push(SectionEntry::Raw {
                    id: 3,
                    bytes: raw(r.range()),
                });
                for idx in r {
                    func_type_indices.push(idx.map_err(malformed)?);
                }
            }
            Payload::TableSection(r) => {
                model.sections.push(SectionEntry::Raw {
                    id: 4,
                    bytes: raw(r.range()),
                });
                for table in r {
                    let table = table.map_err(malformed)?;
                    model.tables.push(TableInfo {
                        min: table.ty.initial,
                        max: table.ty.maximum,
                        funcref: table.ty.element_type.is_func_ref(),
                    });
                }
            }
            Payload::MemorySection(r) => {
                model.sections.push(SectionEntry::Raw {
                    id: 5,
                    bytes: raw(r.range()),
                });
                for mem in r {
                    let mem = mem.map_err(malformed)?;
                    model.memories.push(MemoryLimits {
                        min_pages: mem.initial,
                        max_pages: mem.maximum,
                        is_64: mem.memory64,
                    });
                }
            }
            Payload::GlobalSection(r) => {
                model.sections.push(SectionEntry::Raw {
                    id: 6,
                    bytes: raw(r.range()),
                });
                for global in r {
                    let global = global.map_err(malformed)?;
                    model.globals.push(GlobalInfo {
                        ty: data_type_of(global.ty.content_type),
                        mutable: global.ty.mutable,
                        init: Some(parse_init_expr(&global.init_expr)),
                    });
                }
            }
            Payload::ExportSection(r) => {
                model.sections.push(SectionEntry::Raw {
                    id: 7,
                    bytes: raw(r.range()),
                });
                for export in r {
                    let export = export.map_err(malformed)?;
                    let kind = match export.kind {
                        wasmparser::ExternalKind::Func => ExportKind::Func,
                        wasmparser::ExternalKind::Table => ExportKind::Table,
                        wasmparser::ExternalKind::Memory => ExportKind::Memory,
                        wasmparser::ExternalKind::Global => ExportKind::Global,
                        _ => ExportKind::Other,
                    };
                    model.exports.push(Export {
                        name: export.name.to_string(),
                        kind,
                        index: export.index,
                    });
                }
            }
            Payload::StartSection { func, range } => {
                model.sections.push(SectionEntry::Raw {
                    id: 8,
                    bytes: raw(range),
                });
                model.start = Some(func);
            }
            Payload::ElementSection(r) => {
                model.sections.push(SectionEntry::Raw {
                    id: 9,
                    bytes: raw(r.range()),
                });
                for elem in r {
                    let elem = elem.map_err(malformed)?;
                    let (table, offset, active) = match &elem.kind {
                        wasmparser::ElementKind::Active {
                            table_index,
                            offset_expr,
                        } => (table_index.unwrap_or(0), parse_init_expr(offset_expr), true),
                        _ => {
                            model.needs_host = true;
                            (0, InitExpr::Unsupported, false)
                        }
                    };
                    let funcs = match elem.items {
                        wasmparser::ElementItems::Functions(fs) => {
                            let mut v = Vec::new();
                            for f in fs {
                                v.push(f.map_err(malformed)?);
                            }
                            v
                        }
                        wasmparser::ElementItems::Expressions(_, _) => {
                            model.needs_host = true;
                            Vec::new()
                        }
                    };
                    model.elements.push(ElemSegment {
                        table,
                        offset,
                        funcs,
                        active,
                    });
                }
            }
            Payload::DataCountSection { range, .. } => {
                model.sections.push(SectionEntry::Raw {
                    id: 12,
                    bytes: raw(range),
                });
            }
            Payload::DataSection(r) => {
                model.sections.push(SectionEntry::Raw {
                    id: 11,
                    bytes: raw(r.range()),
                });
                for seg in r {
                    let seg = seg.map_err(malformed)?;
                    let (memory, offset, active) = match &seg.kind {
                        wasmparser::DataKind::Active {
                            memory_index,
                            offset_expr,
                        } => (*memory_index, parse_init_expr(offset_expr), true),
                        wasmparser::DataKind::Passive => {
                            model.needs_host = true;
                            (0, InitExpr::Unsupported, false)
                        }
                    };
                    model.data.push(DataSegment {
                        memory,
                        offset,
                        bytes: seg.data.to_vec(),
                        active,
                    });
                }
            }
            Payload::CodeSectionStart { .. } => {
                model.sections.push(SectionEntry::Code);
            }
            Payload::CodeSectionEntry(body) => {
                let pos = next_defined_func;
                next_defined_func += 1;
                let type_index = func_type_indices.get(pos as usize).copied().unwrap_or(0);
                let func_index = model.num_imported_funcs + pos;
                let f = parse_function_body(&model, bytes, &body, func_index, type_index)?;
                model.functions.push(f);
            }
            Payload::CustomSection(c) => {
                model.sections.push(SectionEntry::Raw {
                    id: 0,
                    bytes: raw(c.range()),
                });
            }
            Payload::UnknownSection { id, range, .. } => {
                model.sections.push(SectionEntry::Raw {
                    id,
                    bytes: raw(range),
                });
            }
            other => {
                return Err(Error::UnsupportedFeature(format!(
                    "unexpected payload: {other:?}"
                )))
            }
        }
    }
    Ok(model)
}

fn parse_function_body(
    model: &InstructionModel,
    module_bytes: &[u8],
    body: &wasmparser::FunctionBody,
    func_index: u32,
    type_index: u32,
) -> Result<FunctionBody> {
    let raw = module_bytes[body.range()].to_vec();
    let unsupported = |raw: Vec<u8>| FunctionBody {
        func_index,
        type_index,
        param_count: 0,
        locals: Vec::new(),
        instructions: Vec::new(),
        mutable: false,
        raw,
    };

    // Locals: parameters first, then declared locals.
    let mut locals: Vec<DataType> = Vec::new();
    let param_count = match model.types.get(type_index as usize) {
        Some(Some(sig)) => {
            locals.extend(&sig.params);
            sig.params.len()
        }
        _ => return Ok(unsupported(raw)),
    };
    let locals_reader = body.get_locals_reader().map_err(malformed)?;
    for decl in locals_reader {
        let (count, ty) = decl.map_err(malformed)?;
        match data_type_of(ty) {
            Some(t) => locals.extend(std::iter::repeat_n(t, count as usize)),
            None => return Ok(unsupported(raw)),
        }
    }

    // Instruction pass. Any unmappable operator flags the whole function.
    let mut instrs: Vec<Instr> = Vec::new();
    let mut ops = body.get_operators_reader().map_err(malformed)?;
    while !ops.eof() {
        let op = ops.read().map_err(malformed)?;
        match lower_operator(&op) {
            Some(i) => instrs.push(i),
            None => return Ok(unsupported(raw)),
        }
    }
    // The final `end` closes the function body; it is not a record.
    match instrs.pop() {
        Some(Instr::End) => {}
        _ => return Ok(unsupported(raw)),
    }

    match classify_body(model, &locals, instrs) {
        Some(instructions) => Ok(FunctionBody {
            func_index,
            type_index,
            param_count,
            locals,
            instructions,
            mutable: true,
            raw,
        }),
        None => Ok(unsupported(raw)),
    }
}

fn block_kind(bt: wasmparser::BlockType) -> Option<BlockKind> {
    match bt {
        wasmparser::BlockType::Empty => Some(BlockKind::Empty),
        wasmparser::BlockType::Type(t) => data_type_of(t).map(BlockKind::Value),
        wasmparser::BlockType::FuncType(idx) => Some(BlockKind::Func(idx)),
    }
}

fn mem_arg(arg: &wasmparser::MemArg) -> Option<MemArg> {
    if arg.memory != 0 {
        return None;
    }
    Some(MemArg {
        align_log: arg.align as u32,
        offset: arg.offset,
    })
}

/// Map a wasmparser operator onto the supported instruction set.
fn lower_operator(op: &wasmparser::Operator) -> Option<Instr> {
    use wasmparser::Operator as O;
    if let Some(n) = instr::numeric_from_parser(op) {
        return Some(Instr::Numeric(n));
    }
    Some(match op {
        O::I32Const { value } => Instr::I32Const(*value),
        O::I64Const { value } => Instr::I64Const(*value),
        O::F32Const { value } => Instr::F32Const(value.bits()),
        O::F64Const { value } => Instr::F64Const(value.bits()),
        O::LocalGet { local_index } => Instr::LocalGet(*local_index),
        O::LocalSet { local_index } => Instr::LocalSet(*local_index),
        O::LocalTee { local_index } => Instr::LocalTee(*local_index),
        O::GlobalGet { global_index } => Instr::GlobalGet(*global_index),
        O::GlobalSet { global_index } => Instr::GlobalSet(*global_index),
        O::I32Load { memarg } => Instr::Load(LoadOp::I32Load, mem_arg(memarg)?),
        O::I64Load { memarg } => Instr::Load(LoadOp::I64Load, mem_arg(memarg)?),
        O::F32Load { memarg } => Instr::Load(LoadOp::F32Load, mem_arg(memarg)?),
        O::F64Load { memarg } => Instr::Load(LoadOp::F64Load, mem_arg(memarg)?),
        O::I32Load8S { memarg } => Instr::Load(LoadOp::I32Load8S, mem_arg(memarg)?),
        O::I32Load8U { memarg } => Instr::Load(LoadOp::I32Load8U, mem_arg(memarg)?),
        O::I32Load16S { memarg } => Instr::Load(LoadOp::I32Load16S, mem_arg(memarg)?),
        O::I32Load16U { memarg } => Instr::Load(LoadOp::I32Load16U, mem_arg(memarg)?),
        O::I64Load8S { memarg } => Instr::Load(LoadOp::I64Load8S, mem_arg(memarg)?),
        O::I64Load8U { memarg } => Instr::Load(LoadOp::I64Load8U, mem_arg(memarg)?),
        O::I64Load16S { memarg } => Instr::Load(LoadOp::I64Load16S, mem_arg(memarg)?),
        O::I64Load16U { memarg } => Instr::Load(LoadOp::I64Load16U, mem_arg(memarg)?),
        O::I64Load32S { memarg } => Instr::Load(LoadOp::I64Load32S, mem_arg(memarg)?),
        O::I64Load32U { memarg } => Instr::Load(LoadOp::I64Load32U, mem_arg(memarg)?),
        O::I32Store { memarg } => Instr::Store(StoreOp::I32Store, mem_arg(memarg)?),
        O::I64Store { memarg } => Instr::Store(StoreOp::I64Store, mem_arg(memarg)?),
        O::F32Store { memarg } => Instr::Store(StoreOp::F32Store, mem_arg(memarg)?),
        O::F64Store { memarg } => Instr::Store(StoreOp::F64Store, mem_arg(memarg)?),
        O::I32Store8 { memarg } => Instr::Store(StoreOp::I32Store8, mem_arg(memarg)?),
        O::I32Store16 { memarg } => Instr::Store(StoreOp::I32Store16, mem_arg(memarg)?),
        O::I64Store8 { memarg } => Instr::Store(StoreOp::I64Store8, mem_arg(memarg)?),
        O::I64Store16 { memarg } => Instr::Store(StoreOp::I64Store16, mem_arg(memarg)?),
        O::I64Store32 { memarg } => Instr::Store(StoreOp::I64Store32, mem_arg(memarg)?),
        O::MemorySize { mem, .. } if *mem == 0 => Instr::MemorySize,
        O::MemoryGrow { mem, .. } if *mem == 0 => Instr::MemoryGrow,
        O::MemoryCopy {
            dst_mem: 0,
            src_mem: 0,
        } => Instr::MemoryCopy,
        O::MemoryFill { mem: 0 } => Instr::MemoryFill,
        O::Drop => Instr::Drop,
        O::Select => Instr::Select,
        O::Unreachable => Instr::Unreachable,
        O::Nop => Instr::Nop,
        O::Block { blockty } => Instr::Block(block_kind(*blockty)?),
        O::Loop { blockty } => Instr::Loop(block_kind(*blockty)?),
        O::If { blockty } => Instr::If(block_kind(*blockty)?),
        O::Else => Instr::Else,
        O::End => Instr::End,
        O::Br { relative_depth } => Instr::Br(*relative_depth),
        O::BrIf { relative_depth } => Instr::BrIf(*relative_depth),
        O::BrTable { targets } => {
            let list: std::result::Result<Vec<u32>, _> = targets.targets().collect();
            Instr::BrTable(list.ok()?, targets.default())
        }
        O::Return => Instr::Return,
        O::Call { function_index } => Instr::Call(*function_index),
        O::CallIndirect {
            type_index,
            table_index,
        } => Instr::CallIndirect {
            type_index: *type_index,
            table_index: *table_index,
        },
        _ => return None,
    })
}

/// Fusion detection plus category/signature assignment.
/// Returns None when a record needs type information the model lacks
/// (out-of-range local, non-numeric global), flagging the function.
fn classify_body(
    model: &InstructionModel,
    locals: &[DataType],
    instrs: Vec<Instr>,
) -> Option<Vec<InstrRecord>> {
    let mut records: Vec<InstrRecord> = Vec::with_capacity(instrs.len());
    for (offset, instr) in instrs.into_iter().enumerate() {
        let fused_load = matches!(instr, Instr::Load(..))
            && offset > 0
            && matches!(records[offset - 1].instr, Instr::I32Const(_));

        let (category, signature, operand_result) = match &instr {
            Instr::I32Const(_) => (InstrCategory::Operand, None, Some(DataType::I32)),
            Instr::I64Const(_) => (InstrCategory::Operand, None, Some(DataType::I64)),
            Instr::F32Const(_) => (InstrCategory::Operand, None, Some(DataType::F32)),
            Instr::F64Const(_) => (InstrCategory::Operand, None, Some(DataType::F64)),
            Instr::LocalGet(k) => {
                let t = locals.get(*k as usize)?;
                (InstrCategory::Operand, None, Some(*t))
            }
            Instr::GlobalGet(k) => {
                let t = model.globals.get(*k as usize)?.ty?;
                (InstrCategory::Operand, None, Some(t))
            }
            Instr::Load(op, _) => {
                if fused_load {
                    (InstrCategory::Operand, None, Some(op.value_type()))
                } else {
                    (
                        InstrCategory::Operator,
                        Some(OperatorType::new(&[DataType::I32], &[op.value_type()])),
                        None,
                    )
                }
            }
            Instr::Store(op, _) => (
                InstrCategory::Operator,
                Some(OperatorType::new(&[DataType::I32, op.value_type()], &[])),
                None,
            ),
            Instr::LocalSet(k) => {
                let t = *locals.get(*k as usize)?;
                (
                    InstrCategory::Operator,
                    Some(OperatorType::new(&[t], &[])),
                    None,
                )
            }
            Instr::LocalTee(k) => {
                let t = *locals.get(*k as usize)?;
                (
                    InstrCategory::Operator,
                    Some(OperatorType::new(&[t], &[t])),
                    None,
                )
            }
            Instr::GlobalSet(k) => {
                let t = model.globals.get(*k as usize)?.ty?;
                (
                    InstrCategory::Operator,
                    Some(OperatorType::new(&[t], &[])),
                    None,
                )
            }
            Instr::Numeric(op) => (InstrCategory::Operator, Some(op.signature()), None),
            Instr::MemoryCopy | Instr::MemoryFill => (
                InstrCategory::Operator,
                Some(OperatorType::new(
                    &[DataType::I32, DataType::I32, DataType::I32],
                    &[],
                )),
                None,
            ),
            Instr::MemorySize | Instr::MemoryGrow => (InstrCategory::Other, None, None),
            Instr::Drop
            | Instr::Select
            | Instr::Unreachable
            | Instr::Nop
            | Instr::Block(_)
            | Instr::Loop(_)
            | Instr::If(_)
            | Instr::Else
            | Instr::End
            | Instr::Br(_)
            | Instr::BrIf(_)
            | Instr::BrTable(_, _)
            | Instr::Return
            | Instr::Call(_)
            | Instr::CallIndirect { .. } => (InstrCategory::Control, None, None),
        };

        if fused_load {
            records[offset - 1].fused_role = FusedRole::AddressConst;
        }
        records.push(InstrRecord {
            offset,
            instr,
            category,
            signature,
            operand_result,
            fused_role: if fused_load {
                FusedRole::FusedLoad
            } else {
                FusedRole::None
            },
        });
    }
    Some(records)
}

fn encoder_block_type(bt: BlockKind) -> wasm_encoder::BlockType {
    match bt {
        BlockKind::Empty => wasm_encoder::BlockType::Empty,
        BlockKind::Value(t) => wasm_encoder::BlockType::Result(encoder_val_type(t)),
        BlockKind::Func(idx) => wasm_encoder::BlockType::FunctionType(idx),
    }
}

fn encoder_val_type(t: DataType) -> wasm_encoder::ValType {
    match t {
        DataType::I32 => wasm_encoder::ValType::I32,
        DataType::I64 => wasm_encoder::ValType::I64,
        DataType::F32 => wasm_encoder::ValType::F32,
        DataType::F64 => wasm_encoder::ValType::F64,
    }
}

/// Translate one model instruction to its encoder form.
pub(crate) fn encoder_instruction(instr: &Instr) -> wasm_encoder::Instruction<'_> {
    use wasm_encoder::Instruction as E;
    match instr {
        Instr::I32Const(v) => E::I32Const(*v),
        Instr::I64Const(v) => E::I64Const(*v),
        Instr::F32Const(bits) => E::F32Const(f32::from_bits(*bits)),
        Instr::F64Const(bits) => E::F64Const(f64::from_bits(*bits)),
        Instr::LocalGet(k) => E::LocalGet(*k),
        Instr::LocalSet(k) => E::LocalSet(*k),
        Instr::LocalTee(k) => E::LocalTee(*k),
        Instr::GlobalGet(k) => E::GlobalGet(*k),
        Instr::GlobalSet(k) => E::GlobalSet(*k),
        Instr::Load(op, arg) => instr::load_to_encoder(*op, *arg),
        Instr::Store(op, arg) => instr::store_to_encoder(*op, *arg),
        Instr::MemorySize => E::MemorySize(0),
        Instr::MemoryGrow => E::MemoryGrow(0),
        Instr::MemoryCopy => E::MemoryCopy {
            src_mem: 0,
            dst_mem: 0,
        },
        Instr::MemoryFill => E::MemoryFill(0),
        Instr::Numeric(op) => instr::numeric_to_encoder(*op),
        Instr::Drop => E::Drop,
        Instr::Select => E::Select,
        Instr::Unreachable => E::Unreachable,
        Instr::Nop => E::Nop,
        Instr::Block(bt) => E::Block(encoder_block_type(*bt)),
        Instr::Loop(bt) => E::Loop(encoder_block_type(*bt)),
        Instr::If(bt) => E::If(encoder_block_type(*bt)),
        Instr::Else => E::Else,
        Instr::End => E::End,
        Instr::Br(l) => E::Br(*l),
        Instr::BrIf(l) => E::BrIf(*l),
        Instr::BrTable(targets, default) => E::BrTable(targets.as_slice().into(), *default),
        Instr::Return => E::Return,
        Instr::Call(f) => E::Call(*f),
        Instr::CallIndirect {
            type_index,
            table_index,
        } => E::CallIndirect {
            type_index: *type_index,
            table_index: *table_index,
        },
    }
}

fn encode_function(f: &FunctionBody) -> Result<wasm_encoder::Function> {
    let instrs: Vec<Instr> = f.instructions.iter().map(|r| r.instr.clone()).collect();
    encode_function_parts(f, &instrs)
}

fn encode_function_parts(f: &FunctionBody, instrs: &[Instr]) -> Result<wasm_encoder::Function> {
    // Run-length compress the declared locals (parameters are not declared).
    let mut runs: Vec<(u32, wasm_encoder::ValType)> = Vec::new();
    for t in &f.locals[f.param_count..] {
        let vt = encoder_val_type(*t);
        match runs.last_mut() {
            Some((n, last)) if *last == vt => {
                *n = n
                    .checked_add(1)
                    .ok_or_else(|| Error::EncodeOverflow("locals count".into()))?;
            }
            _ => runs.push((1, vt)),
        }
    }
    let mut func = wasm_encoder::Function::new(runs);
    for instr in instrs {
        func.instruction(&encoder_instruction(instr));
    }
    func.instruction(&wasm_encoder::Instruction::End);
    Ok(func)
}

/// Re-encode the model into a Wasm binary. Non-code sections are emitted
/// verbatim; function bodies are rebuilt from their records (raw bytes for
/// non-mutable functions).
pub fn encode_module(model: &InstructionModel) -> Result<Vec<u8>> {
    encode_module_with_body(model, None)
}

/// Same as [`encode_module`] but with one function body (position in
/// `model.functions`) replaced by `instrs`. The mutation engine uses this to
/// emit mutants without rebuilding a whole model.
pub(crate) fn encode_module_with_body(
    model: &InstructionModel,
    replace: Option<(usize, &[Instr])>,
) -> Result<Vec<u8>> {
    let mut module = wasm_encoder::Module::new();
    for entry in &model.sections {
        match entry {
            SectionEntry::Raw { id, bytes } => {
                module.section(&wasm_encoder::RawSection {
                    id: *id,
                    data: bytes,
                });
            }
            SectionEntry::Code => {
                let mut code = wasm_encoder::CodeSection::new();
                for (pos, f) in model.functions.iter().enumerate() {
                    let override_body = match replace {
                        Some((p, instrs)) if p == pos => Some(instrs),
                        _ => None,
                    };
                    if let Some(instrs) = override_body {
                        code.function(&encode_function_parts(f, instrs)?);
                    } else if f.mutable {
                        code.function(&encode_function(f)?);
                    } else {
                        code.raw(&f.raw);
                    }
                }
                module.section(&code);
            }
        }
    }
    Ok(module.finish())
}

/// Validation verdict from the independent validator.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub ok: bool,
    pub message: Option<String>,
    pub offset: Option<usize>,
}

/// Type-check a binary with wasmparser's validator (a component independent
/// of the encoding path).
pub fn validate_module(bytes: &[u8]) -> Verdict {
    let mut validator =
        wasmparser::Validator::new_with_features(wasmparser::WasmFeatures::default());
    match validator.validate_all(bytes) {
        Ok(_) => Verdict {
            ok: true,
            message: None,
            offset: None,
        },
        Err(e) => Verdict {
            ok: false,
            message: Some(e.message().to_string()),
            offset: Some(e.offset()),
        },
    }
}

/// Accept either a binary module or wat text; returns binary bytes.
pub fn to_wasm_bytes(input: &[u8]) -> Result<Vec<u8>> {
    wat::parse_bytes(input)
        .map(|b| b.into_owned())
        .map_err(|e| Error::MalformedBinary {
            offset: 0,
            message: e.to_string(),
        })
}

/// Simulate the net stack effect of a straight-line record slice.
/// Returns the pushed types (bottom to top) for a slice that starts from an
/// empty abstract stack, or None if the slice underflows, mismatches, or
/// contains Control/Other records.
pub fn simulate_stack_effect(records: &[InstrRecord]) -> Option<Vec<DataType>> {
    let mut stack: Vec<DataType> = Vec::new();
    for rec in records {
        match rec.category {
            InstrCategory::Operand => {
                // A fused load is an Operand at the pair level, but on the
                // real stack it still consumes its address constant's push.
                if rec.fused_role == FusedRole::FusedLoad && stack.pop()? != DataType::I32 {
                    return None;
                }
                stack.push(rec.operand_result?);
            }
            InstrCategory::Operator => {
                let sig = rec.signature.as_ref()?;
                for want in sig.params.iter().rev() {
                    let got = stack.pop()?;
                    if got != *want {
                        return None;
                    }
                }
                stack.extend(&sig.results);
            }
            InstrCategory::Control | InstrCategory::Other => return None,
        }
    }
    Some(stack)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_of(wat_src: &str) -> InstructionModel {
        let bytes = wat::parse_str(wat_src).unwrap();
        parse_module(&bytes).unwrap()
    }

    #[test]
    fn three_record_example() {
        let m =
            model_of("(module (func (param i32) (result i32) i32.const 2 local.get 0 i32.sub))");
        let f = &m.functions[0];
        assert!(f.mutable);
        assert_eq!(f.instructions.len(), 3);
        assert_eq!(f.instructions[0].category, InstrCategory::Operand);
        assert_eq!(f.instructions[0].operand_result, Some(DataType::I32));
        assert_eq!(f.instructions[1].category, InstrCategory::Operand);
        let sig = f.instructions[2].signature.as_ref().unwrap();
        assert_eq!(sig.params, vec![DataType::I32, DataType::I32]);
        assert_eq!(sig.results, vec![DataType::I32]);
    }

    #[test]
    fn empty_module() {
        let m = model_of("(module)");
        assert!(m.functions.is_empty());
        let bytes = encode_module(&m).unwrap();
        assert!(validate_module(&bytes).ok);
    }

    #[test]
    fn control_records_are_control() {
        let m = model_of(
            "(module (func (block (loop (br_if 1 (i32.const 0)) (br 0))) (nop) (drop (i32.const 1))))",
        );
        let f = &m.functions[0];
        for rec in &f.instructions {
            match rec.instr {
                Instr::I32Const(_) => assert_eq!(rec.category, InstrCategory::Operand),
                _ => assert_eq!(rec.category, InstrCategory::Control, "{:?}", rec.instr),
            }
        }
    }

    #[test]
    fn fused_load_detection() {
        let m = model_of(
            "(module (memory 1) (func (result i32) i32.const 8 i32.load local.get? ))"
                .replace("local.get? ", "")
                .as_str(),
        );
        let f = &m.functions[0];
        assert_eq!(f.instructions[0].fused_role, FusedRole::AddressConst);
        assert_eq!(f.instructions[1].fused_role, FusedRole::FusedLoad);
        assert_eq!(f.instructions[1].category, InstrCategory::Operand);
        assert_eq!(f.instructions[1].operand_result, Some(DataType::I32));
    }

    #[test]
    fn computed_address_load_is_operator() {
        let m =
            model_of("(module (memory 1) (func (param i32) (result i64) local.get 0 i64.load))");
        let f = &m.functions[0];
        assert_eq!(f.instructions[1].category, InstrCategory::Operator);
        let sig = f.instructions[1].signature.as_ref().unwrap();
        assert_eq!(sig.params, vec![DataType::I32]);
        assert_eq!(sig.results, vec![DataType::I64]);
    }

    #[test]
    fn roundtrip_structural_equality() {
        let src = r#"
            (module
              (memory 1)
              (global $g (mut i32) (i32.const 7))
              (func (export "f") (param i32 i64) (result i32)
                (local f64)
                i32.const 5
                local.get 0
                i32.add
                global.get 0
                i32.sub)
              (func (result f64) local.get? f64.const 0x1.5p3)
              (data (i32.const 0) "abc"))
        "#
        .replace("local.get? ", "");
        let bytes = wat::parse_str(&src).unwrap();
        let m1 = parse_module(&bytes).unwrap();
        let re = encode_module(&m1).unwrap();
        assert!(validate_module(&re).ok, "{:?}", validate_module(&re));
        let m2 = parse_module(&re).unwrap();
        assert!(m1.structural_eq(&m2));
        // And once more: canonical encodings are stable.
        let re2 = encode_module(&m2).unwrap();
        assert_eq!(re, re2);
    }

    #[test]
    fn simd_function_flagged_non_mutable_and_reencodes() {
        let src = r#"
            (module
              (memory 1)
              (func (result i32) i32.const 1)
              (func (result v128) v128.const i64x2 1 2))
        "#;
        let bytes = wat::parse_str(src).unwrap();
        let m = parse_module(&bytes).unwrap();
        assert!(m.functions[0].mutable);
        assert!(!m.functions[1].mutable);
        let re = encode_module(&m).unwrap();
        assert!(validate_module(&re).ok);
        let m2 = parse_module(&re).unwrap();
        assert!(m.structural_eq(&m2));
    }

    #[test]
    fn invalid_module_rejected_with_location() {
        // i64 operand fed into an i32 address slot.
        let bad = wat::parse_str("(module (memory 1) (func (result i64) i64.const 0 i64.load))");
        // wat itself does not type-check; the validator must reject.
        let bytes = bad.unwrap();
        let verdict = validate_module(&bytes);
        assert!(!verdict.ok);
        assert!(verdict.message.is_some());
        assert!(verdict.offset.is_some());
    }

    #[test]
    fn stack_effect_simulation() {
        let m = model_of("(module (memory 1) (func i32.const 8 i32.const 7 i32.store))");
        let f = &m.functions[0];
        let eff = simulate_stack_effect(&f.instructions).unwrap();
        assert!(eff.is_empty());
    }
}
