//! Instruction-stepping interpreter over the module model, with per-opcode
//! cost accounting. Only the four-numeric-type core plus control, locals,
//! globals, memory, and funcref tables is executed; anything else rejects
//! the module up front.

use super::CostModel;
use crate::model::{
    BlockKind, DataType, FuncSig, FunctionBody, InitExpr, Instr, InstructionModel, NumericOp,
};
use std::collections::HashMap;

pub const PAGE_SIZE: usize = 65536;
const MAX_CALL_DEPTH: usize = 1000;
/// Growth ceiling when the module declares no maximum (256 MiB).
const DEFAULT_MAX_PAGES: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    I32(i32),
    I64(i64),
    F32(f32),
    F64(f64),
}

impl Value {
    pub fn zero(ty: DataType) -> Value {
        match ty {
            DataType::I32 => Value::I32(0),
            DataType::I64 => Value::I64(0),
            DataType::F32 => Value::F32(0.0),
            DataType::F64 => Value::F64(0.0),
        }
    }

    pub fn render(&self) -> String {
        match self {
            Value::I32(v) => format!("{v}"),
            Value::I64(v) => format!("{v}"),
            Value::F32(v) => format!("f32:0x{:08x}", v.to_bits()),
            Value::F64(v) => format!("f64:0x{:016x}", v.to_bits()),
        }
    }
}

#[derive(Debug)]
pub enum MockError {
    Trap(String),
    StepBudgetExceeded(u64),
    Unsupported(String),
}

type Exec<T> = Result<T, MockError>;

fn trap<T>(msg: impl Into<String>) -> Exec<T> {
    Err(MockError::Trap(msg.into()))
}

/// Result of a completed run.
#[derive(Debug)]
pub struct MockRun {
    pub results: Vec<Value>,
    /// Exported global values after the run, in export order.
    pub exported_globals: Vec<(String, Value)>,
    /// Final memory contents hash, when the module declares a memory.
    pub memory_digest: Option<String>,
    pub pseudo_time: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CtrlKind {
    Block,
    Loop,
    If,
}

#[derive(Debug, Clone)]
struct CtrlEntry {
    kind: CtrlKind,
    /// Offset of the opening instruction.
    start: usize,
    /// Offset of the matching `end`.
    end: usize,
    /// Stack height just below the block parameters.
    height: usize,
    param_arity: usize,
    result_arity: usize,
}

struct Frame {
    func_pos: usize,
    locals: Vec<Value>,
    pc: usize,
    value_base: usize,
    ctrl: Vec<CtrlEntry>,
    result_arity: usize,
}

/// Matching end/else offsets for every structured instruction.
fn scan_blocks(f: &FunctionBody) -> HashMap<usize, (usize, Option<usize>)> {
    let mut map = HashMap::new();
    let mut open: Vec<(usize, Option<usize>)> = Vec::new();
    for rec in &f.instructions {
        match rec.instr {
            Instr::Block(_) | Instr::Loop(_) | Instr::If(_) => open.push((rec.offset, None)),
            Instr::Else => {
                if let Some(top) = open.last_mut() {
                    top.1 = Some(rec.offset);
                }
            }
            Instr::End => {
                if let Some((start, else_at)) = open.pop() {
                    map.insert(start, (rec.offset, else_at));
                }
            }
            _ => {}
        }
    }
    map
}

pub struct Interpreter<'m> {
    model: &'m InstructionModel,
    cost_model: &'m CostModel,
    /// Per defined function, per record: precomputed cost.
    costs: Vec<Vec<u64>>,
    /// Per defined function: offset -> (end, else).
    blocks: Vec<HashMap<usize, (usize, Option<usize>)>>,
    /// For loop_amplification = false: which sites have been charged.
    charged: Vec<Vec<bool>>,
    globals: Vec<Value>,
    memory: Vec<u8>,
    max_pages: u64,
    has_memory: bool,
    table: Vec<Option<u32>>,
    stack: Vec<Value>,
    frames: Vec<Frame>,
    steps: u64,
    cost: u64,
}

impl<'m> Interpreter<'m> {
    /// Instantiate: init globals, memory, table, data segments; run the
    /// start function if present.
    pub fn instantiate(
        model: &'m InstructionModel,
        cost_model: &'m CostModel,
    ) -> Exec<Interpreter<'m>> {
        if model.needs_host {
            return Err(MockError::Unsupported(
                "module needs imports or host-managed segments".into(),
            ));
        }
        for f in &model.functions {
            if !f.mutable {
                return Err(MockError::Unsupported(format!(
                    "function {} uses constructs outside the interpreted subset",
                    f.func_index
                )));
            }
        }
        if model.memories.len() > 1 {
            return Err(MockError::Unsupported("multiple memories".into()));
        }
        if model.memories.first().map(|m| m.is_64).unwrap_or(false) {
            return Err(MockError::Unsupported("memory64".into()));
        }

        let mut globals = Vec::with_capacity(model.globals.len());
        for (i, g) in model.globals.iter().enumerate() {
            let ty =
                g.ty.ok_or_else(|| MockError::Unsupported(format!("global {i} type")))?;
            let v = match g.init {
                Some(InitExpr::I32(v)) => Value::I32(v),
                Some(InitExpr::I64(v)) => Value::I64(v),
                Some(InitExpr::F32(bits)) => Value::F32(f32::from_bits(bits)),
                Some(InitExpr::F64(bits)) => Value::F64(f64::from_bits(bits)),
                Some(InitExpr::GlobalGet(k)) if (k as usize) < globals.len() => globals[k as usize],
                _ => return Err(MockError::Unsupported(format!("global {i} initializer"))),
            };
            match (ty, v) {
                (DataType::I32, Value::I32(_))
                | (DataType::I64, Value::I64(_))
                | (DataType::F32, Value::F32(_))
                | (DataType::F64, Value::F64(_)) => globals.push(v),
                _ => return trap(format!("global {i} initializer type mismatch")),
            }
        }

        let has_memory = !model.memories.is_empty();
        let (pages, max_pages) = match model.memories.first() {
            Some(m) => (
                m.min_pages.max(1),
                m.max_pages.unwrap_or(DEFAULT_MAX_PAGES).min(65536),
            ),
            None => (1, 1),
        };
        let mut memory = vec![0u8; pages as usize * PAGE_SIZE];

        let mut table: Vec<Option<u32>> = match model.tables.first() {
            Some(t) if t.funcref => vec![None; t.min as usize],
            Some(_) => return Err(MockError::Unsupported("non-funcref table".into())),
            None => Vec::new(),
        };
        let resolve = |e: &InitExpr, globals: &[Value]| -> Exec<i64> {
            match e {
                InitExpr::I32(v) => Ok(*v as i64),
                InitExpr::I64(v) => Ok(*v),
                InitExpr::GlobalGet(k) => match globals.get(*k as usize) {
                    Some(Value::I32(v)) => Ok(*v as i64),
                    Some(Value::I64(v)) => Ok(*v),
                    _ => trap("segment offset global"),
                },
                _ => trap("segment offset initializer"),
            }
        };
        for seg in &model.elements {
            if !seg.active {
                continue;
            }
            let base = resolve(&seg.offset, &globals)? as usize;
            if base + seg.funcs.len() > table.len() {
                return trap("element segment out of bounds");
            }
            for (i, f) in seg.funcs.iter().enumerate() {
                table[base + i] = Some(*f);
            }
        }
        for seg in &model.data {
            if !seg.active {
                continue;
            }
            let base = resolve(&seg.offset, &globals)? as usize;
            if base + seg.bytes.len() > memory.len() {
                return trap("data segment out of bounds");
            }
            memory[base..base + seg.bytes.len()].copy_from_slice(&seg.bytes);
        }

        let costs: Vec<Vec<u64>> = model
            .functions
            .iter()
            .map(|f| {
                f.instructions
                    .iter()
                    .map(|r| cost_model.cost_of(r.instr.opcode_name()))
                    .collect()
            })
            .collect();
        let charged = model
            .functions
            .iter()
            .map(|f| vec![false; f.instructions.len()])
            .collect();
        let blocks = model.functions.iter().map(scan_blocks).collect();

        let mut interp = Interpreter {
            model,
            cost_model,
            costs,
            blocks,
            charged,
            globals,
            memory,
            max_pages,
            has_memory,
            table,
            stack: Vec::new(),
            frames: Vec::new(),
            steps: 0,
            cost: 0,
        };
        if let Some(start) = model.start {
            interp.invoke_by_index(start, &[])?;
        }
        Ok(interp)
    }

    /// Run an exported function to completion.
    pub fn invoke_export(&mut self, name: &str) -> Exec<Vec<Value>> {
        let idx = self
            .model
            .export_func(name)
            .ok_or_else(|| MockError::Unsupported(format!("no exported function `{name}`")))?;
        self.invoke_by_index(idx, &[])
    }

    pub fn finish(self, entry_results: Vec<Value>) -> MockRun {
        let exported_globals = self
            .model
            .exports
            .iter()
            .filter(|e| e.kind == crate::model::ExportKind::Global)
            .filter_map(|e| {
                self.globals
                    .get(e.index as usize)
                    .map(|v| (e.name.clone(), *v))
            })
            .collect();
        MockRun {
            results: entry_results,
            exported_globals,
            memory_digest: if self.has_memory {
                Some(crate::harness::sha256_hex(&self.memory))
            } else {
                None
            },
            pseudo_time: self.cost,
            steps: self.steps,
        }
    }

    fn sig_of(&self, func_index: u32) -> Exec<&FuncSig> {
        self.model
            .func_sig(func_index)
            .ok_or_else(|| MockError::Unsupported(format!("signature of function {func_index}")))
    }

    fn invoke_by_index(&mut self, func_index: u32, args: &[Value]) -> Exec<Vec<Value>> {
        let sig = self.sig_of(func_index)?;
        if sig.params.len() != args.len() {
            return Err(MockError::Unsupported(format!(
                "entry function expects {} arguments",
                sig.params.len()
            )));
        }
        let result_arity = sig.results.len();
        let base_frames = self.frames.len();
        let base_stack = self.stack.len();
        self.stack.extend_from_slice(args);
        self.push_frame(func_index, result_arity)?;
        self.run_until(base_frames)?;
        let results = self.stack.split_off(base_stack);
        Ok(results)
    }

    fn push_frame(&mut self, func_index: u32, result_arity: usize) -> Exec<()> {
        if self.frames.len() >= MAX_CALL_DEPTH {
            return trap("call stack exhausted");
        }
        let func_pos = func_index
            .checked_sub(self.model.num_imported_funcs)
            .map(|p| p as usize)
            .filter(|p| *p < self.model.functions.len())
            .ok_or_else(|| MockError::Unsupported(format!("call to function {func_index}")))?;
        let f = &self.model.functions[func_pos];
        let value_base = self.stack.len() - f.param_count;
        let mut locals: Vec<Value> = self.stack.split_off(value_base);
        for t in &f.locals[f.param_count..] {
            locals.push(Value::zero(*t));
        }
        self.frames.push(Frame {
            func_pos,
            locals,
            pc: 0,
            value_base,
            ctrl: Vec::new(),
            result_arity,
        });
        Ok(())
    }

    fn block_arity(&self, kind: BlockKind) -> Exec<(usize, usize)> {
        match kind {
            BlockKind::Empty => Ok((0, 0)),
            BlockKind::Value(_) => Ok((0, 1)),
            BlockKind::Func(idx) => match self.model.types.get(idx as usize) {
                Some(Some(sig)) => Ok((sig.params.len(), sig.results.len())),
                _ => Err(MockError::Unsupported(format!("block type {idx}"))),
            },
        }
    }

    fn pop(&mut self) -> Exec<Value> {
        self.stack
            .pop()
            .ok_or_else(|| MockError::Trap("value stack underflow (interpreter bug)".into()))
    }

    fn pop_i32(&mut self) -> Exec<i32> {
        match self.pop()? {
            Value::I32(v) => Ok(v),
            other => trap(format!("expected i32, got {other:?}")),
        }
    }

    fn pop_i64(&mut self) -> Exec<i64> {
        match self.pop()? {
            Value::I64(v) => Ok(v),
            other => trap(format!("expected i64, got {other:?}")),
        }
    }

    fn pop_f32(&mut self) -> Exec<f32> {
        match self.pop()? {
            Value::F32(v) => Ok(v),
            other => trap(format!("expected f32, got {other:?}")),
        }
    }

    fn pop_f64(&mut self) -> Exec<f64> {
        match self.pop()? {
            Value::F64(v) => Ok(v),
            other => trap(format!("expected f64, got {other:?}")),
        }
    }

    fn effective_addr(&mut self, offset: u64, size: usize) -> Exec<usize> {
        let base = self.pop_i32()? as u32 as u64;
        let addr = base + offset;
        let end = addr
            .checked_add(size as u64)
            .ok_or_else(|| MockError::Trap("memory address overflow".into()))?;
        if end > self.memory.len() as u64 {
            return trap(format!("out-of-bounds memory access at {addr:#x}"));
        }
        Ok(addr as usize)
    }

    fn load_bytes<const N: usize>(&mut self, offset: u64) -> Exec<[u8; N]> {
        let addr = self.effective_addr(offset, N)?;
        let mut out = [0u8; N];
        out.copy_from_slice(&self.memory[addr..addr + N]);
        Ok(out)
    }

    fn store_bytes(&mut self, offset: u64, bytes: &[u8]) -> Exec<()> {
        let addr = self.effective_addr(offset, bytes.len())?;
        self.memory[addr..addr + bytes.len()].copy_from_slice(bytes);
        Ok(())
    }

    /// Unwind to the `depth`-th enclosing label and continue there.
    fn branch(&mut self, depth: u32) -> Exec<()> {
        let frame = self.frames.last_mut().unwrap();
        let depth = depth as usize;
        if depth >= frame.ctrl.len() {
            // Branch to the function label: return.
            return self.do_return();
        }
        let target_pos = frame.ctrl.len() - 1 - depth;
        let target = frame.ctrl[target_pos].clone();
        let carry_arity = if target.kind == CtrlKind::Loop {
            target.param_arity
        } else {
            target.result_arity
        };
        let carried: Vec<Value> = self.stack.split_off(self.stack.len() - carry_arity);
        self.stack.truncate(target.height);
        self.stack.extend(carried);
        let frame = self.frames.last_mut().unwrap();
        if target.kind == CtrlKind::Loop {
            frame.ctrl.truncate(target_pos + 1);
            frame.pc = target.start + 1;
        } else {
            frame.ctrl.truncate(target_pos);
            frame.pc = target.end + 1;
        }
        Ok(())
    }

    fn do_return(&mut self) -> Exec<()> {
        let frame = self.frames.pop().unwrap();
        let results: Vec<Value> = self.stack.split_off(self.stack.len() - frame.result_arity);
        self.stack.truncate(frame.value_base);
        self.stack.extend(results);
        Ok(())
    }

    fn run_until(&mut self, base_frames: usize) -> Exec<()> {
        while self.frames.len() > base_frames {
            self.step()?;
        }
        Ok(())
    }

    fn charge(&mut self, func_pos: usize, pc: usize) {
        if self.cost_model.loop_amplification {
            self.cost = self.cost.saturating_add(self.costs[func_pos][pc]);
        } else if !self.charged[func_pos][pc] {
            self.charged[func_pos][pc] = true;
            self.cost = self.cost.saturating_add(self.costs[func_pos][pc]);
        }
    }

    fn step(&mut self) -> Exec<()> {
        let model = self.model;
        let (func_pos, pc) = {
            let f = self.frames.last().unwrap();
            (f.func_pos, f.pc)
        };
        let body = &model.functions[func_pos];
        if pc >= body.instructions.len() {
            return self.do_return();
        }

        self.steps += 1;
        if self.steps > self.cost_model.step_budget {
            return Err(MockError::StepBudgetExceeded(self.cost_model.step_budget));
        }
        self.charge(func_pos, pc);

        let instr = &body.instructions[pc].instr;
        let mut next_pc = pc + 1;

        match instr {
            Instr::I32Const(v) => self.stack.push(Value::I32(*v)),
            Instr::I64Const(v) => self.stack.push(Value::I64(*v)),
            Instr::F32Const(bits) => self.stack.push(Value::F32(f32::from_bits(*bits))),
            Instr::F64Const(bits) => self.stack.push(Value::F64(f64::from_bits(*bits))),
            Instr::LocalGet(k) => {
                let v = self.frames.last().unwrap().locals[*k as usize];
                self.stack.push(v);
            }
            Instr::LocalSet(k) => {
                let v = self.pop()?;
                self.frames.last_mut().unwrap().locals[*k as usize] = v;
            }
            Instr::LocalTee(k) => {
                let v = *self
                    .stack
                    .last()
                    .ok_or(MockError::Trap("underflow".into()))?;
                self.frames.last_mut().unwrap().locals[*k as usize] = v;
            }
            Instr::GlobalGet(k) => self.stack.push(self.globals[*k as usize]),
            Instr::GlobalSet(k) => {
                let v = self.pop()?;
                self.globals[*k as usize] = v;
            }
            Instr::Load(op, arg) => self.exec_load(*op, arg.offset)?,
            Instr::Store(op, arg) => self.exec_store(*op, arg.offset)?,
            Instr::MemorySize => {
                self.stack
                    .push(Value::I32((self.memory.len() / PAGE_SIZE) as i32));
            }
            Instr::MemoryGrow => {
                let n = self.pop_i32()? as u32 as u64;
                let cur = (self.memory.len() / PAGE_SIZE) as u64;
                if n.checked_add(cur).map(|t| t <= self.max_pages) == Some(true) {
                    self.memory.resize((cur + n) as usize * PAGE_SIZE, 0);
                    self.stack.push(Value::I32(cur as i32));
                } else {
                    self.stack.push(Value::I32(-1));
                }
            }
            Instr::MemoryCopy => {
                let n = self.pop_i32()? as u32 as usize;
                let src = self.pop_i32()? as u32 as usize;
                let dst = self.pop_i32()? as u32 as usize;
                let len = self.memory.len();
                if src.checked_add(n).map(|e| e <= len) != Some(true)
                    || dst.checked_add(n).map(|e| e <= len) != Some(true)
                {
                    return trap("out-of-bounds memory.copy");
                }
                self.memory.copy_within(src..src + n, dst);
            }
            Instr::MemoryFill => {
                let n = self.pop_i32()? as u32 as usize;
                let val = self.pop_i32()? as u8;
                let dst = self.pop_i32()? as u32 as usize;
                if dst.checked_add(n).map(|e| e <= self.memory.len()) != Some(true) {
                    return trap("out-of-bounds memory.fill");
                }
                self.memory[dst..dst + n].fill(val);
            }
            Instr::Numeric(op) => self.exec_numeric(*op)?,
            Instr::Drop => {
                self.pop()?;
            }
            Instr::Select => {
                let c = self.pop_i32()?;
                let b = self.pop()?;
                let a = self.pop()?;
                self.stack.push(if c != 0 { a } else { b });
            }
            Instr::Unreachable => return trap("unreachable executed"),
            Instr::Nop => {}
            Instr::Block(bt) | Instr::Loop(bt) | Instr::If(bt) => {
                let (params, results) = self.block_arity(*bt)?;
                let (end, else_at) = *self.blocks[func_pos]
                    .get(&pc)
                    .ok_or_else(|| MockError::Trap("unmatched block (interpreter bug)".into()))?;
                let kind = match instr {
                    Instr::Block(_) => CtrlKind::Block,
                    Instr::Loop(_) => CtrlKind::Loop,
                    _ => CtrlKind::If,
                };
                if kind == CtrlKind::If {
                    let cond = self.pop_i32()?;
                    if cond == 0 {
                        match else_at {
                            Some(e) => next_pc = e + 1,
                            None => next_pc = end, // run the End to pop the entry
                        }
                    }
                }
                let height = self.stack.len() - params;
                self.frames.last_mut().unwrap().ctrl.push(CtrlEntry {
                    kind,
                    start: pc,
                    end,
                    height,
                    param_arity: params,
                    result_arity: results,
                });
            }
            Instr::Else => {
                // Falling into else means the then-branch finished; skip to
                // the matching end, which pops the entry.
                let frame = self.frames.last().unwrap();
                let entry = frame
                    .ctrl
                    .last()
                    .ok_or_else(|| MockError::Trap("else outside if (interpreter bug)".into()))?;
                next_pc = entry.end;
            }
            Instr::End => {
                self.frames.last_mut().unwrap().ctrl.pop();
            }
            Instr::Br(depth) => {
                self.branch(*depth)?;
                return Ok(());
            }
            Instr::BrIf(depth) => {
                let c = self.pop_i32()?;
                if c != 0 {
                    self.branch(*depth)?;
                    return Ok(());
                }
            }
            Instr::BrTable(targets, default) => {
                let i = self.pop_i32()? as u32 as usize;
                let depth = targets.get(i).copied().unwrap_or(*default);
                self.branch(depth)?;
                return Ok(());
            }
            Instr::Return => {
                self.do_return()?;
                return Ok(());
            }
            Instr::Call(f) => {
                let arity = {
                    let sig = self.sig_of(*f)?;
                    sig.results.len()
                };
                self.frames.last_mut().unwrap().pc = next_pc;
                self.push_frame(*f, arity)?;
                return Ok(());
            }
            Instr::CallIndirect { type_index, .. } => {
                let i = self.pop_i32()? as u32 as usize;
                let Some(slot) = self.table.get(i) else {
                    return trap("undefined table element");
                };
                let Some(f) = slot else {
                    return trap("uninitialized table element");
                };
                let f = *f;
                let expected = match self.model.types.get(*type_index as usize) {
                    Some(Some(sig)) => sig.clone(),
                    _ => return Err(MockError::Unsupported("call_indirect type".into())),
                };
                let actual = self.sig_of(f)?.clone();
                if actual.params != expected.params || actual.results != expected.results {
                    return trap("indirect call type mismatch");
                }
                self.frames.last_mut().unwrap().pc = next_pc;
                self.push_frame(f, actual.results.len())?;
                return Ok(());
            }
        }
        if let Some(frame) = self.frames.last_mut() {
            frame.pc = next_pc;
        }
        Ok(())
    }

    fn exec_load(&mut self, op: crate::model::LoadOp, offset: u64) -> Exec<()> {
        use crate::model::LoadOp as L;
        let v = match op {
            L::I32Load => Value::I32(i32::from_le_bytes(self.load_bytes::<4>(offset)?)),
            L::I64Load => Value::I64(i64::from_le_bytes(self.load_bytes::<8>(offset)?)),
            L::F32Load => Value::F32(f32::from_le_bytes(self.load_bytes::<4>(offset)?)),
            L::F64Load => Value::F64(f64::from_le_bytes(self.load_bytes::<8>(offset)?)),
            L::I32Load8S => Value::I32(i8::from_le_bytes(self.load_bytes::<1>(offset)?) as i32),
            L::I32Load8U => Value::I32(u8::from_le_bytes(self.load_bytes::<1>(offset)?) as i32),
            L::I32Load16S => Value::I32(i16::from_le_bytes(self.load_bytes::<2>(offset)?) as i32),
            L::I32Load16U => Value::I32(u16::from_le_bytes(self.load_bytes::<2>(offset)?) as i32),
            L::I64Load8S => Value::I64(i8::from_le_bytes(self.load_bytes::<1>(offset)?) as i64),
            L::I64Load8U => Value::I64(u8::from_le_bytes(self.load_bytes::<1>(offset)?) as i64),
            L::I64Load16S => Value::I64(i16::from_le_bytes(self.load_bytes::<2>(offset)?) as i64),
            L::I64Load16U => Value::I64(u16::from_le_bytes(self.load_bytes::<2>(offset)?) as i64),
            L::I64Load32S => Value::I64(i32::from_le_bytes(self.load_bytes::<4>(offset)?) as i64),
            L::I64Load32U => Value::I64(u32::from_le_bytes(self.load_bytes::<4>(offset)?) as i64),
        };
        self.stack.push(v);
        Ok(())
    }

    fn exec_store(&mut self, op: crate::model::StoreOp, offset: u64) -> Exec<()> {
        use crate::model::StoreOp as S;
        match op {
            S::I32Store => {
                let v = self.pop_i32()?;
                self.store_bytes(offset, &v.to_le_bytes())?;
            }
            S::I64Store => {
                let v = self.pop_i64()?;
                self.store_bytes(offset, &v.to_le_bytes())?;
            }
            S::F32Store => {
                let v = self.pop_f32()?;
                self.store_bytes(offset, &v.to_le_bytes())?;
            }
            S::F64Store => {
                let v = self.pop_f64()?;
                self.store_bytes(offset, &v.to_le_bytes())?;
            }
            S::I32Store8 => {
                let v = self.pop_i32()?;
                self.store_bytes(offset, &[(v & 0xff) as u8])?;
            }
            S::I32Store16 => {
                let v = self.pop_i32()?;
                self.store_bytes(offset, &(v as u16).to_le_bytes())?;
            }
            S::I64Store8 => {
                let v = self.pop_i64()?;
                self.store_bytes(offset, &[(v & 0xff) as u8])?;
            }
            S::I64Store16 => {
                let v = self.pop_i64()?;
                self.store_bytes(offset, &(v as u16).to_le_bytes())?;
            }
            S::I64Store32 => {
                let v = self.pop_i64()?;
                self.store_bytes(offset, &(v as u32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    #[allow(clippy::unit_arg)] // the binop macros expand to unit blocks inside Ok(...)
    fn exec_numeric(&mut self, op: NumericOp) -> Exec<()> {
        use NumericOp as N;

        macro_rules! bin_i32 {
            (|$a:ident, $b:ident| $body:expr) => {{
                let $b: i32 = self.pop_i32()?;
                let $a: i32 = self.pop_i32()?;
                let v: Value = $body?;
                self.stack.push(v);
            }};
        }
        macro_rules! bin_i64 {
            (|$a:ident, $b:ident| $body:expr) => {{
                let $b: i64 = self.pop_i64()?;
                let $a: i64 = self.pop_i64()?;
                let v: Value = $body?;
                self.stack.push(v);
            }};
        }
        macro_rules! bin_f32 {
            (|$a:ident, $b:ident| $body:expr) => {{
                let $b: f32 = self.pop_f32()?;
                let $a: f32 = self.pop_f32()?;
                self.stack.push($body);
            }};
        }
        macro_rules! bin_f64 {
            (|$a:ident, $b:ident| $body:expr) => {{
                let $b: f64 = self.pop_f64()?;
                let $a: f64 = self.pop_f64()?;
                self.stack.push($body);
            }};
        }
        fn b32(v: bool) -> Value {
            Value::I32(v as i32)
        }

        let v = match op {
            // i32 test/relops
            N::I32Eqz => {
                let a = self.pop_i32()?;
                b32(a == 0)
            }
            N::I32Eq => return Ok(bin_i32!(|a, b| Ok(b32(a == b)))),
            N::I32Ne => return Ok(bin_i32!(|a, b| Ok(b32(a != b)))),
            N::I32LtS => return Ok(bin_i32!(|a, b| Ok(b32(a < b)))),
            N::I32LtU => return Ok(bin_i32!(|a, b| Ok(b32((a as u32) < b as u32)))),
            N::I32GtS => return Ok(bin_i32!(|a, b| Ok(b32(a > b)))),
            N::I32GtU => return Ok(bin_i32!(|a, b| Ok(b32(a as u32 > b as u32)))),
            N::I32LeS => return Ok(bin_i32!(|a, b| Ok(b32(a <= b)))),
            N::I32LeU => return Ok(bin_i32!(|a, b| Ok(b32(a as u32 <= b as u32)))),
            N::I32GeS => return Ok(bin_i32!(|a, b| Ok(b32(a >= b)))),
            N::I32GeU => return Ok(bin_i32!(|a, b| Ok(b32(a as u32 >= b as u32)))),
            // i64 test/relops
            N::I64Eqz => {
                let a = self.pop_i64()?;
                b32(a == 0)
            }
            N::I64Eq => return Ok(bin_i64!(|a, b| Ok(b32(a == b)))),
            N::I64Ne => return Ok(bin_i64!(|a, b| Ok(b32(a != b)))),
            N::I64LtS => return Ok(bin_i64!(|a, b| Ok(b32(a < b)))),
            N::I64LtU => return Ok(bin_i64!(|a, b| Ok(b32((a as u64) < b as u64)))),
            N::I64GtS => return Ok(bin_i64!(|a, b| Ok(b32(a > b)))),
            N::I64GtU => return Ok(bin_i64!(|a, b| Ok(b32(a as u64 > b as u64)))),
            N::I64LeS => return Ok(bin_i64!(|a, b| Ok(b32(a <= b)))),
            N::I64LeU => return Ok(bin_i64!(|a, b| Ok(b32(a as u64 <= b as u64)))),
            N::I64GeS => return Ok(bin_i64!(|a, b| Ok(b32(a >= b)))),
            N::I64GeU => return Ok(bin_i64!(|a, b| Ok(b32(a as u64 >= b as u64)))),
            // float relops
            N::F32Eq => return Ok(bin_f32!(|a, b| Value::I32((a == b) as i32))),
            N::F32Ne => return Ok(bin_f32!(|a, b| Value::I32((a != b) as i32))),
            N::F32Lt => return Ok(bin_f32!(|a, b| Value::I32((a < b) as i32))),
            N::F32Gt => return Ok(bin_f32!(|a, b| Value::I32((a > b) as i32))),
            N::F32Le => return Ok(bin_f32!(|a, b| Value::I32((a <= b) as i32))),
            N::F32Ge => return Ok(bin_f32!(|a, b| Value::I32((a >= b) as i32))),
            N::F64Eq => return Ok(bin_f64!(|a, b| Value::I32((a == b) as i32))),
            N::F64Ne => return Ok(bin_f64!(|a, b| Value::I32((a != b) as i32))),
            N::F64Lt => return Ok(bin_f64!(|a, b| Value::I32((a < b) as i32))),
            N::F64Gt => return Ok(bin_f64!(|a, b| Value::I32((a > b) as i32))),
            N::F64Le => return Ok(bin_f64!(|a, b| Value::I32((a <= b) as i32))),
            N::F64Ge => return Ok(bin_f64!(|a, b| Value::I32((a >= b) as i32))),
            // i32 unops
            N::I32Clz => {
                let a = self.pop_i32()?;
                Value::I32(a.leading_zeros() as i32)
            }
            N::I32Ctz => {
                let a = self.pop_i32()?;
                Value::I32(a.trailing_zeros() as i32)
            }
            N::I32Popcnt => {
                let a = self.pop_i32()?;
                Value::I32(a.count_ones() as i32)
            }
            // i32 binops
            N::I32Add => return Ok(bin_i32!(|a, b| Ok(Value::I32(a.wrapping_add(b))))),
            N::I32Sub => return Ok(bin_i32!(|a, b| Ok(Value::I32(a.wrapping_sub(b))))),
            N::I32Mul => return Ok(bin_i32!(|a, b| Ok(Value::I32(a.wrapping_mul(b))))),
            N::I32DivS => {
                return Ok(bin_i32!(|a, b| {
                    if b == 0 {
                        return trap("integer divide by zero");
                    }
                    if a == i32::MIN && b == -1 {
                        return trap("integer overflow");
                    }
                    Ok(Value::I32(a.wrapping_div(b)))
                }))
            }
            N::I32DivU => {
                return Ok(bin_i32!(|a, b| {
                    if b == 0 {
                        return trap("integer divide by zero");
                    }
                    Ok(Value::I32(((a as u32) / (b as u32)) as i32))
                }))
            }
            N::I32RemS => {
                return Ok(bin_i32!(|a, b| {
                    if b == 0 {
                        return trap("integer divide by zero");
                    }
                    Ok(Value::I32(a.wrapping_rem(b)))
                }))
            }
            N::I32RemU => {
                return Ok(bin_i32!(|a, b| {
                    if b == 0 {
                        return trap("integer divide by zero");
                    }
                    Ok(Value::I32(((a as u32) % (b as u32)) as i32))
                }))
            }
            N::I32And => return Ok(bin_i32!(|a, b| Ok(Value::I32(a & b)))),
            N::I32Or => return Ok(bin_i32!(|a, b| Ok(Value::I32(a | b)))),
            N::I32Xor => return Ok(bin_i32!(|a, b| Ok(Value::I32(a ^ b)))),
            N::I32Shl => return Ok(bin_i32!(|a, b| Ok(Value::I32(a.wrapping_shl(b as u32))))),
            N::I32ShrS => return Ok(bin_i32!(|a, b| Ok(Value::I32(a.wrapping_shr(b as u32))))),
            N::I32ShrU => {
                return Ok(bin_i32!(|a, b| Ok(Value::I32(
                    ((a as u32).wrapping_shr(b as u32)) as i32
                ))))
            }
            N::I32Rotl => {
                return Ok(bin_i32!(|a, b| Ok(Value::I32(
                    a.rotate_left(b as u32 % 32)
                ))))
            }
            N::I32Rotr => {
                return Ok(bin_i32!(|a, b| Ok(Value::I32(
                    a.rotate_right(b as u32 % 32)
                ))))
            }
            // i64 unops
            N::I64Clz => {
                let a = self.pop_i64()?;
                Value::I64(a.leading_zeros() as i64)
            }
            N::I64Ctz => {
                let a = self.pop_i64()?;
                Value::I64(a.trailing_zeros() as i64)
            }
            N::I64Popcnt => {
                let a = self.pop_i64()?;
                Value::I64(a.count_ones() as i64)
            }
            // i64 binops
            N::I64Add => return Ok(bin_i64!(|a, b| Ok(Value::I64(a.wrapping_add(b))))),
            N::I64Sub => return Ok(bin_i64!(|a, b| Ok(Value::I64(a.wrapping_sub(b))))),
            N::I64Mul => return Ok(bin_i64!(|a, b| Ok(Value::I64(a.wrapping_mul(b))))),
            N::I64DivS => {
                return Ok(bin_i64!(|a, b| {
                    if b == 0 {
                        return trap("integer divide by zero");
                    }
                    if a == i64::MIN && b == -1 {
                        return trap("integer overflow");
                    }
                    Ok(Value::I64(a.wrapping_div(b)))
                }))
            }
            N::I64DivU => {
                return Ok(bin_i64!(|a, b| {
                    if b == 0 {
                        return trap("integer divide by zero");
                    }
                    Ok(Value::I64(((a as u64) / (b as u64)) as i64))
                }))
            }
            N::I64RemS => {
                return Ok(bin_i64!(|a, b| {
                    if b == 0 {
                        return trap("integer divide by zero");
                    }
                    Ok(Value::I64(a.wrapping_rem(b)))
                }))
            }
            N::I64RemU => {
                return Ok(bin_i64!(|a, b| {
                    if b == 0 {
                        return trap("integer divide by zero");
                    }
                    Ok(Value::I64(((a as u64) % (b as u64)) as i64))
                }))
            }
            N::I64And => return Ok(bin_i64!(|a, b| Ok(Value::I64(a & b)))),
            N::I64Or => return Ok(bin_i64!(|a, b| Ok(Value::I64(a | b)))),
            N::I64Xor => return Ok(bin_i64!(|a, b| Ok(Value::I64(a ^ b)))),
            N::I64Shl => return Ok(bin_i64!(|a, b| Ok(Value::I64(a.wrapping_shl(b as u32))))),
            N::I64ShrS => return Ok(bin_i64!(|a, b| Ok(Value::I64(a.wrapping_shr(b as u32))))),
            N::I64ShrU => {
                return Ok(bin_i64!(|a, b| Ok(Value::I64(
                    ((a as u64).wrapping_shr(b as u32)) as i64
                ))))
            }
            N::I64Rotl => {
                return Ok(bin_i64!(|a, b| Ok(Value::I64(
                    a.rotate_left((b as u32) % 64)
                ))))
            }
            N::I64Rotr => {
                return Ok(bin_i64!(|a, b| Ok(Value::I64(
                    a.rotate_right((b as u32) % 64)
                ))))
            }
            // f32 unops
            N::F32Abs => {
                let a = self.pop_f32()?;
                Value::F32(a.abs())
            }
            N::F32Neg => {
                let a = self.pop_f32()?;
                Value::F32(-a)
            }
            N::F32Ceil => {
                let a = self.pop_f32()?;
                Value::F32(a.ceil())
            }
            N::F32Floor => {
                let a = self.pop_f32()?;
                Value::F32(a.floor())
            }
            N::F32Trunc => {
                let a = self.pop_f32()?;
                Value::F32(a.trunc())
            }
            N::F32Nearest => {
                let a = self.pop_f32()?;
                Value::F32(a.round_ties_even())
            }
            N::F32Sqrt => {
                let a = self.pop_f32()?;
                Value::F32(a.sqrt())
            }
            // f32 binops
            N::F32Add => return Ok(bin_f32!(|a, b| Value::F32(a + b))),
            N::F32Sub => return Ok(bin_f32!(|a, b| Value::F32(a - b))),
            N::F32Mul => return Ok(bin_f32!(|a, b| Value::F32(a * b))),
            N::F32Div => return Ok(bin_f32!(|a, b| Value::F32(a / b))),
            N::F32Min => return Ok(bin_f32!(|a, b| Value::F32(wasm_fmin32(a, b)))),
            N::F32Max => return Ok(bin_f32!(|a, b| Value::F32(wasm_fmax32(a, b)))),
            N::F32Copysign => return Ok(bin_f32!(|a, b| Value::F32(a.copysign(b)))),
            // f64 unops
            N::F64Abs => {
                let a = self.pop_f64()?;
                Value::F64(a.abs())
            }
            N::F64Neg => {
                let a = self.pop_f64()?;
                Value::F64(-a)
            }
            N::F64Ceil => {
                let a = self.pop_f64()?;
                Value::F64(a.ceil())
            }
            N::F64Floor => {
                let a = self.pop_f64()?;
                Value::F64(a.floor())
            }
            N::F64Trunc => {
                let a = self.pop_f64()?;
                Value::F64(a.trunc())
            }
            N::F64Nearest => {
                let a = self.pop_f64()?;
                Value::F64(a.round_ties_even())
            }
            N::F64Sqrt => {
                let a = self.pop_f64()?;
                Value::F64(a.sqrt())
            }
            // f64 binops
            N::F64Add => return Ok(bin_f64!(|a, b| Value::F64(a + b))),
            N::F64Sub => return Ok(bin_f64!(|a, b| Value::F64(a - b))),
            N::F64Mul => return Ok(bin_f64!(|a, b| Value::F64(a * b))),
            N::F64Div => return Ok(bin_f64!(|a, b| Value::F64(a / b))),
            N::F64Min => return Ok(bin_f64!(|a, b| Value::F64(wasm_fmin64(a, b)))),
            N::F64Max => return Ok(bin_f64!(|a, b| Value::F64(wasm_fmax64(a, b)))),
            N::F64Copysign => return Ok(bin_f64!(|a, b| Value::F64(a.copysign(b)))),
            // conversions
            N::I32WrapI64 => {
                let a = self.pop_i64()?;
                Value::I32(a as i32)
            }
            N::I32TruncF32S => {
                let a = self.pop_f32()? as f64;
                Value::I32(trunc_to_i32_s(a)?)
            }
            N::I32TruncF32U => {
                let a = self.pop_f32()? as f64;
                Value::I32(trunc_to_i32_u(a)? as i32)
            }
            N::I32TruncF64S => {
                let a = self.pop_f64()?;
                Value::I32(trunc_to_i32_s(a)?)
            }
            N::I32TruncF64U => {
                let a = self.pop_f64()?;
                Value::I32(trunc_to_i32_u(a)? as i32)
            }
            N::I64ExtendI32S => {
                let a = self.pop_i32()?;
                Value::I64(a as i64)
            }
            N::I64ExtendI32U => {
                let a = self.pop_i32()?;
                Value::I64(a as u32 as i64)
            }
            N::I64TruncF32S => {
                let a = self.pop_f32()? as f64;
                Value::I64(trunc_to_i64_s(a)?)
            }
            N::I64TruncF32U => {
                let a = self.pop_f32()? as f64;
                Value::I64(trunc_to_i64_u(a)? as i64)
            }
            N::I64TruncF64S => {
                let a = self.pop_f64()?;
                Value::I64(trunc_to_i64_s(a)?)
            }
            N::I64TruncF64U => {
                let a = self.pop_f64()?;
                Value::I64(trunc_to_i64_u(a)? as i64)
            }
            N::F32ConvertI32S => {
                let a = self.pop_i32()?;
                Value::F32(a as f32)
            }
            N::F32ConvertI32U => {
                let a = self.pop_i32()?;
                Value::F32(a as u32 as f32)
            }
            N::F32ConvertI64S => {
                let a = self.pop_i64()?;
                Value::F32(a as f32)
            }
            N::F32ConvertI64U => {
                let a = self.pop_i64()?;
                Value::F32(a as u64 as f32)
            }
            N::F32DemoteF64 => {
                let a = self.pop_f64()?;
                Value::F32(a as f32)
            }
            N::F64ConvertI32S => {
                let a = self.pop_i32()?;
                Value::F64(a as f64)
            }
            N::F64ConvertI32U => {
                let a = self.pop_i32()?;
                Value::F64(a as u32 as f64)
            }
            N::F64ConvertI64S => {
                let a = self.pop_i64()?;
                Value::F64(a as f64)
            }
            N::F64ConvertI64U => {
                let a = self.pop_i64()?;
                Value::F64(a as u64 as f64)
            }
            N::F64PromoteF32 => {
                let a = self.pop_f32()?;
                Value::F64(a as f64)
            }
            N::I32ReinterpretF32 => {
                let a = self.pop_f32()?;
                Value::I32(a.to_bits() as i32)
            }
            N::I64ReinterpretF64 => {
                let a = self.pop_f64()?;
                Value::I64(a.to_bits() as i64)
            }
            N::F32ReinterpretI32 => {
                let a = self.pop_i32()?;
                Value::F32(f32::from_bits(a as u32))
            }
            N::F64ReinterpretI64 => {
                let a = self.pop_i64()?;
                Value::F64(f64::from_bits(a as u64))
            }
            // sign extension
            N::I32Extend8S => {
                let a = self.pop_i32()?;
                Value::I32(a as i8 as i32)
            }
            N::I32Extend16S => {
                let a = self.pop_i32()?;
                Value::I32(a as i16 as i32)
            }
            N::I64Extend8S => {
                let a = self.pop_i64()?;
                Value::I64(a as i8 as i64)
            }
            N::I64Extend16S => {
                let a = self.pop_i64()?;
                Value::I64(a as i16 as i64)
            }
            N::I64Extend32S => {
                let a = self.pop_i64()?;
                Value::I64(a as i32 as i64)
            }
            // saturating truncation (Rust `as` saturates with NaN -> 0)
            N::I32TruncSatF32S => {
                let a = self.pop_f32()?;
                Value::I32(a as i32)
            }
            N::I32TruncSatF32U => {
                let a = self.pop_f32()?;
                Value::I32(a as u32 as i32)
            }
            N::I32TruncSatF64S => {
                let a = self.pop_f64()?;
                Value::I32(a as i32)
            }
            N::I32TruncSatF64U => {
                let a = self.pop_f64()?;
                Value::I32(a as u32 as i32)
            }
            N::I64TruncSatF32S => {
                let a = self.pop_f32()?;
                Value::I64(a as i64)
            }
            N::I64TruncSatF32U => {
                let a = self.pop_f32()?;
                Value::I64(a as u64 as i64)
            }
            N::I64TruncSatF64S => {
                let a = self.pop_f64()?;
                Value::I64(a as i64)
            }
            N::I64TruncSatF64U => {
                let a = self.pop_f64()?;
                Value::I64(a as u64 as i64)
            }
        };
        self.stack.push(v);
        Ok(())
    }
}

fn trunc_to_i32_s(v: f64) -> Exec<i32> {
    if v.is_nan() {
        return trap("invalid conversion to integer");
    }
    let t = v.trunc();
    if !(-2147483648.0..2147483648.0).contains(&t) {
        return trap("integer overflow");
    }
    Ok(t as i32)
}

fn trunc_to_i32_u(v: f64) -> Exec<u32> {
    if v.is_nan() {
        return trap("invalid conversion to integer");
    }
    let t = v.trunc();
    if t >= 4294967296.0 || t <= -1.0 {
        return trap("integer overflow");
    }
    Ok(t as u32)
}

fn trunc_to_i64_s(v: f64) -> Exec<i64> {
    if v.is_nan() {
        return trap("invalid conversion to integer");
    }
    let t = v.trunc();
    if !(-9223372036854775808.0..9223372036854775808.0).contains(&t) {
        return trap("integer overflow");
    }
    Ok(t as i64)
}

fn trunc_to_i64_u(v: f64) -> Exec<u64> {
    if v.is_nan() {
        return trap("invalid conversion to integer");
    }
    let t = v.trunc();
    if t >= 18446744073709551616.0 || t <= -1.0 {
        return trap("integer overflow");
    }
    Ok(t as u64)
}

// Wasm min/max: NaN if either operand is NaN; -0 orders below +0.
fn wasm_fmin32(a: f32, b: f32) -> f32 {
    if a.is_nan() || b.is_nan() {
        f32::NAN
    } else if a == b {
        if a.is_sign_negative() {
            a
        } else {
            b
        }
    } else if a < b {
        a
    } else {
        b
    }
}

fn wasm_fmax32(a: f32, b: f32) -> f32 {
    if a.is_nan() || b.is_nan() {
        f32::NAN
    } else if a == b {
        if a.is_sign_positive() {
            a
        } else {
            b
        }
    } else if a > b {
        a
    } else {
        b
    }
}

fn wasm_fmin64(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        if a.is_sign_negative() {
            a
        } else {
            b
        }
    } else if a < b {
        a
    } else {
        b
    }
}

fn wasm_fmax64(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        if a.is_sign_positive() {
            a
        } else {
            b
        }
    } else if a > b {
        a
    } else {
        b
    }
}
