/**
 * Minimal pickle decoder for the objects found in Planetoid distribution
 * files: numpy arrays, scipy CSR matrices, and the adjacency defaultdict.
 *
 * Supports pickle protocols 0-4 opcodes as far as those objects need them,
 * in both spellings found in the wild: files written long ago (byte strings
 * via BINSTRING, module paths like `scipy.sparse.csr` / `copy_reg`) and
 * files re-pickled by current Python (latin1 `_codecs.encode` byte strings,
 * `scipy.sparse._csr` / `numpy._core.multiarray`). Anything outside that
 * vocabulary raises a PickleError naming the opcode and offset.
 */

export class PickleError extends Error {}

/** Raw numpy array: dtype descriptor, shape, and the little-endian buffer. */
export class NDArray {
  shape: number[] = [];
  dtype = "";
  raw: Uint8Array = new Uint8Array(0);

  /** Element count implied by the shape. */
  get size(): number {
    return this.shape.reduce((a, b) => a * b, 1);
  }

  /** Decode the buffer into plain numbers (row-major). */
  toNumbers(): number[] {
    const { kind, itemSize } = parseDtype(this.dtype);
    if (this.raw.byteLength !== this.size * itemSize) {
      throw new PickleError(
        `array buffer holds ${this.raw.byteLength} bytes, expected ` +
        `${this.size} x ${itemSize}`);
    }
    const view = new DataView(
      this.raw.buffer, this.raw.byteOffset, this.raw.byteLength);
    const out = new Array<number>(this.size);
    for (let i = 0; i < this.size; i++) {
      const at = i * itemSize;
      switch (kind) {
        case "f8": out[i] = view.getFloat64(at, true); break;
        case "f4": out[i] = view.getFloat32(at, true); break;
        case "i4": out[i] = view.getInt32(at, true); break;
        case "i2": out[i] = view.getInt16(at, true); break;
        case "i1": out[i] = view.getInt8(at); break;
        case "u1": case "b1": out[i] = view.getUint8(at); break;
        case "i8": {
          const big = view.getBigInt64(at, true);
          if (big > BigInt(Number.MAX_SAFE_INTEGER) ||
              big < -BigInt(Number.MAX_SAFE_INTEGER)) {
            throw new PickleError(`int64 value ${big} exceeds safe range`);
          }
          out[i] = Number(big);
          break;
        }
        default: throw new PickleError(`unhandled dtype kind ${kind}`);
      }
    }
    return out;
  }
}

/** Compressed-sparse-row matrix as pickled by scipy. */
export class CSRMatrix {
  shape: [number, number] = [0, 0];
  data!: NDArray;
  indices!: NDArray;
  indptr!: NDArray;
}

class DType {
  constructor(public descr: string) {}
}

/** Placeholder for a class looked up by GLOBAL/STACK_GLOBAL. */
class Global {
  constructor(public module: string, public name: string,
              public kind: GlobalKind) {}
}

type GlobalKind =
  | "ndarray-reconstruct" | "ndarray-class" | "dtype-class" | "csr-class"
  | "defaultdict" | "list-class" | "object-class" | "dict-class"
  | "codecs-encode" | "reconstructor";

const NUMPY_MULTIARRAY = new Set([
  "numpy.core.multiarray", "numpy._core.multiarray",
  "numpy.core._multiarray_umath",
]);
const SCIPY_CSR = new Set([
  "scipy.sparse.csr", "scipy.sparse._csr", "scipy.sparse",
]);
const BUILTINS = new Set(["__builtin__", "builtins"]);

function resolveGlobal(module: string, name: string): Global {
  let kind: GlobalKind | undefined;
  if (NUMPY_MULTIARRAY.has(module) && name === "_reconstruct") {
    kind = "ndarray-reconstruct";
  } else if (module === "numpy" && name === "ndarray") {
    kind = "ndarray-class";
  } else if ((module === "numpy" || NUMPY_MULTIARRAY.has(module)) &&
             name === "dtype") {
    kind = "dtype-class";
  } else if (SCIPY_CSR.has(module) && name === "csr_matrix") {
    kind = "csr-class";
  } else if (module === "collections" && name === "defaultdict") {
    kind = "defaultdict";
  } else if (BUILTINS.has(module) && name === "list") {
    kind = "list-class";
  } else if (BUILTINS.has(module) && name === "object") {
    kind = "object-class";
  } else if (BUILTINS.has(module) && name === "dict") {
    kind = "dict-class";
  } else if (module === "_codecs" && name === "encode") {
    kind = "codecs-encode";
  } else if ((module === "copy_reg" || module === "copyreg") &&
             name === "_reconstructor") {
    kind = "reconstructor";
  }
  if (kind === undefined) {
    throw new PickleError(`unsupported global ${module}.${name}`);
  }
  return new Global(module, name, kind);
}

function parseDtype(descr: string): { kind: string; itemSize: number } {
  let body = descr;
  if (body.startsWith("<") || body.startsWith("|")) {
    body = body.slice(1);
  } else if (body.startsWith(">") || body.startsWith("=")) {
    throw new PickleError(`unsupported byte order in dtype ${descr}`);
  }
  const sizes: Record<string, number> = {
    f8: 8, f4: 4, i8: 8, i4: 4, i2: 2, i1: 1, u1: 1, b1: 1,
  };
  const itemSize = sizes[body];
  if (itemSize === undefined) {
    throw new PickleError(`unsupported dtype ${descr}`);
  }
  return { kind: body, itemSize };
}

/** Latin1 bytes<->string is a bijection; py2 str values travel as strings. */
function latin1ToBytes(text: string): Uint8Array {
  const out = new Uint8Array(text.length);
  for (let i = 0; i < text.length; i++) {
    const code = text.charCodeAt(i);
    if (code > 0xff) {
      throw new PickleError(`non-latin1 character in byte string (${code})`);
    }
    out[i] = code;
  }
  return out;
}

function asBytes(value: unknown): Uint8Array {
  if (value instanceof Uint8Array) return value;
  if (typeof value === "string") return latin1ToBytes(value);
  throw new PickleError(`expected a byte string, got ${typeof value}`);
}

const MARK = Symbol("mark");

class Reader {
  pos = 0;
  constructor(private buf: Uint8Array,
              private view = new DataView(
                buf.buffer, buf.byteOffset, buf.byteLength)) {}

  get done(): boolean { return this.pos >= this.buf.length; }

  u8(): number {
    if (this.pos >= this.buf.length) throw new PickleError("truncated pickle");
    return this.buf[this.pos++]!;
  }

  bytes(n: number): Uint8Array {
    if (this.pos + n > this.buf.length) {
      throw new PickleError("truncated pickle");
    }
    const out = this.buf.subarray(this.pos, this.pos + n);
    this.pos += n;
    return out;
  }

  u16(): number { const v = this.view.getUint16(this.pos, true); this.pos += 2; return v; }
  u32(): number { const v = this.view.getUint32(this.pos, true); this.pos += 4; return v; }
  i32(): number { const v = this.view.getInt32(this.pos, true); this.pos += 4; return v; }
  f64be(): number { const v = this.view.getFloat64(this.pos, false); this.pos += 8; return v; }

  u64(): number {
    const big = this.view.getBigUint64(this.pos, true);
    this.pos += 8;
    if (big > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new PickleError("length exceeds safe integer range");
    }
    return Number(big);
  }

  /** Newline-terminated ASCII line (protocol 0 arguments). */
  line(): string {
    const start = this.pos;
    while (this.pos < this.buf.length && this.buf[this.pos] !== 0x0a) {
      this.pos++;
    }
    if (this.pos >= this.buf.length) throw new PickleError("truncated pickle");
    const text = Buffer.from(this.buf.subarray(start, this.pos)).toString("ascii");
    this.pos++;
    return text;
  }
}

/** Little-endian two's-complement long (LONG1/LONG4 payload). */
function decodeLong(bytes: Uint8Array): number {
  let value = 0n;
  for (let i = bytes.length - 1; i >= 0; i--) {
    value = (value << 8n) | BigInt(bytes[i]!);
  }
  if (bytes.length > 0 && (bytes[bytes.length - 1]! & 0x80) !== 0) {
    value -= 1n << BigInt(8 * bytes.length);
  }
  if (value > BigInt(Number.MAX_SAFE_INTEGER) ||
      value < -BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new PickleError(`long value ${value} exceeds safe range`);
  }
  return Number(value);
}

export function decodePickle(buf: Uint8Array): unknown {
  const r = new Reader(buf);
  const stack: unknown[] = [];
  const memo = new Map<number, unknown>();
  const utf8 = new TextDecoder("utf-8", { fatal: true });
  const latin1 = new TextDecoder("latin1");

  const pop = (): unknown => {
    if (stack.length === 0) throw new PickleError("stack underflow");
    return stack.pop();
  };
  const popMark = (): unknown[] => {
    const at = stack.lastIndexOf(MARK);
    if (at < 0) throw new PickleError("no MARK on stack");
    return stack.splice(at, stack.length - at).slice(1);
  };
  const top = (): unknown => {
    if (stack.length === 0) throw new PickleError("stack underflow");
    return stack[stack.length - 1];
  };

  const setItems = (target: unknown, flat: unknown[]): void => {
    if (!(target instanceof Map)) {
      throw new PickleError("SETITEMS on a non-dict");
    }
    for (let i = 0; i + 1 < flat.length; i += 2) {
      target.set(flat[i], flat[i + 1]);
    }
  };

  const reduce = (callable: unknown, args: unknown[]): unknown => {
    if (!(callable instanceof Global)) {
      throw new PickleError("REDUCE of a non-global callable");
    }
    switch (callable.kind) {
      case "ndarray-reconstruct":
        return new NDArray();
      case "codecs-encode": {
        const [text, encoding] = args;
        if (encoding !== "latin1" && encoding !== undefined) {
          throw new PickleError(`unsupported codec ${String(encoding)}`);
        }
        if (typeof text !== "string") {
          throw new PickleError("codecs.encode expects a string");
        }
        return latin1ToBytes(text);
      }
      case "dtype-class": {
        const descr = args[0];
        if (typeof descr !== "string") {
          throw new PickleError("dtype descriptor must be a string");
        }
        return new DType(descr);
      }
      case "defaultdict":
        return new Map<unknown, unknown>();
      case "reconstructor": {
        const cls = args[0];
        if (cls instanceof Global && cls.kind === "csr-class") {
          return new CSRMatrix();
        }
        if (cls instanceof Global && cls.kind === "ndarray-class") {
          return new NDArray();
        }
        throw new PickleError("unsupported _reconstructor target");
      }
      case "dict-class":
        return new Map<unknown, unknown>();
      case "list-class":
        return args[0] ?? [];
      default:
        throw new PickleError(
          `cannot call ${callable.module}.${callable.name}`);
    }
  };

  const newObj = (cls: unknown): unknown => {
    if (!(cls instanceof Global)) {
      throw new PickleError("NEWOBJ of a non-global class");
    }
    switch (cls.kind) {
      case "csr-class": return new CSRMatrix();
      case "ndarray-class": return new NDArray();
      case "defaultdict": case "dict-class": return new Map();
      default:
        throw new PickleError(`cannot instantiate ${cls.module}.${cls.name}`);
    }
  };

  const build = (obj: unknown, state: unknown): unknown => {
    if (obj instanceof NDArray) {
      if (!Array.isArray(state) || state.length < 5) {
        throw new PickleError("unexpected ndarray state");
      }
      const [, shape, dtype, isFortran, raw] = state;
      if (!Array.isArray(shape)) {
        throw new PickleError("ndarray shape must be a tuple");
      }
      if (!(dtype instanceof DType)) {
        throw new PickleError("ndarray state carries no dtype");
      }
      if (isFortran) {
        throw new PickleError("Fortran-ordered arrays are not supported");
      }
      obj.shape = shape.map((d) => {
        if (typeof d !== "number") throw new PickleError("bad shape entry");
        return d;
      });
      obj.dtype = dtype.descr;
      obj.raw = asBytes(raw);
      parseDtype(obj.dtype); // reject unsupported dtypes early
      return obj;
    }
    if (obj instanceof CSRMatrix) {
      if (!(state instanceof Map)) {
        throw new PickleError("unexpected csr_matrix state");
      }
      const shape = state.get("_shape");
      if (!Array.isArray(shape) || shape.length !== 2) {
        throw new PickleError("csr_matrix state carries no 2-d _shape");
      }
      obj.shape = [Number(shape[0]), Number(shape[1])];
      for (const field of ["data", "indices", "indptr"] as const) {
        const arr = state.get(field);
        if (!(arr instanceof NDArray)) {
          throw new PickleError(`csr_matrix state misses ${field}`);
        }
        obj[field] = arr;
      }
      return obj;
    }
    if (obj instanceof DType) {
      // state tuple: (version, byteorder, subdescr, names, fields, ...)
      if (Array.isArray(state) && typeof state[1] === "string") {
        if (state[1] === ">") {
          throw new PickleError("big-endian dtypes are not supported");
        }
      }
      return obj;
    }
    throw new PickleError("BUILD on an unsupported object");
  };

  while (true) {
    const at = r.pos;
    const op = r.u8();
    switch (op) {
      case 0x80: r.u8(); break;                       // PROTO
      case 0x95: r.bytes(8); break;                   // FRAME
      case 0x2e: {                                    // STOP
        const result = pop();
        return result;
      }
      case 0x28: stack.push(MARK); break;             // MARK
      case 0x4e: stack.push(null); break;             // NONE
      case 0x88: stack.push(true); break;             // NEWTRUE
      case 0x89: stack.push(false); break;            // NEWFALSE
      case 0x4b: stack.push(r.u8()); break;           // BININT1
      case 0x4d: stack.push(r.u16()); break;          // BININT2
      case 0x4a: stack.push(r.i32()); break;          // BININT
      case 0x8a: stack.push(decodeLong(r.bytes(r.u8()))); break;   // LONG1
      case 0x8b: stack.push(decodeLong(r.bytes(r.u32()))); break;  // LONG4
      case 0x49: {                                    // INT (text)
        const text = r.line();
        if (text === "00") stack.push(false);
        else if (text === "01") stack.push(true);
        else stack.push(parseInt(text, 10));
        break;
      }
      case 0x4c: stack.push(parseInt(r.line().replace(/L$/, ""), 10)); break; // LONG
      case 0x47: stack.push(r.f64be()); break;        // BINFLOAT
      case 0x46: stack.push(parseFloat(r.line())); break;           // FLOAT
      case 0x55: stack.push(latin1.decode(r.bytes(r.u8()))); break; // SHORT_BINSTRING
      case 0x54: stack.push(latin1.decode(r.bytes(r.u32()))); break; // BINSTRING
      case 0x58: stack.push(utf8.decode(r.bytes(r.u32()))); break;  // BINUNICODE
      case 0x8c: stack.push(utf8.decode(r.bytes(r.u8()))); break;   // SHORT_BINUNICODE
      case 0x8d: stack.push(utf8.decode(r.bytes(r.u64()))); break;  // BINUNICODE8
      case 0x43: stack.push(r.bytes(r.u8()).slice()); break;        // SHORT_BINBYTES
      case 0x42: stack.push(r.bytes(r.u32()).slice()); break;       // BINBYTES
      case 0x8e: stack.push(r.bytes(r.u64()).slice()); break;       // BINBYTES8
      case 0x29: stack.push([]); break;               // EMPTY_TUPLE
      case 0x85: stack.push([pop()]); break;          // TUPLE1
      case 0x86: {                                    // TUPLE2
        const b = pop(), a = pop();
        stack.push([a, b]);
        break;
      }
      case 0x87: {                                    // TUPLE3
        const c = pop(), b = pop(), a = pop();
        stack.push([a, b, c]);
        break;
      }
      case 0x74: stack.push(popMark()); break;        // TUPLE
      case 0x5d: stack.push([]); break;               // EMPTY_LIST
      case 0x6c: stack.push(popMark()); break;        // LIST
      case 0x61: {                                    // APPEND
        const item = pop();
        const list = top();
        if (!Array.isArray(list)) throw new PickleError("APPEND on non-list");
        list.push(item);
        break;
      }
      case 0x65: {                                    // APPENDS
        const items = popMark();
        const list = top();
        if (!Array.isArray(list)) throw new PickleError("APPENDS on non-list");
        list.push(...items);
        break;
      }
      case 0x7d: stack.push(new Map()); break;        // EMPTY_DICT
      case 0x64: {                                    // DICT
        const flat = popMark();
        const map = new Map<unknown, unknown>();
        setItems(map, flat);
        stack.push(map);
        break;
      }
      case 0x73: {                                    // SETITEM
        const value = pop(), key = pop();
        setItems(top(), [key, value]);
        break;
      }
      case 0x75: {                                    // SETITEMS
        const flat = popMark();
        setItems(top(), flat);
        break;
      }
      case 0x63: {                                    // GLOBAL
        const module = r.line();
        const name = r.line();
        stack.push(resolveGlobal(module, name));
        break;
      }
      case 0x93: {                                    // STACK_GLOBAL
        const name = pop(), module = pop();
        if (typeof module !== "string" || typeof name !== "string") {
          throw new PickleError("STACK_GLOBAL expects two strings");
        }
        stack.push(resolveGlobal(module, name));
        break;
      }
      case 0x71: memo.set(r.u8(), top()); break;      // BINPUT
      case 0x72: memo.set(r.u32(), top()); break;     // LONG_BINPUT
      case 0x70: memo.set(parseInt(r.line(), 10), top()); break; // PUT
      case 0x94: memo.set(memo.size, top()); break;   // MEMOIZE
      case 0x68: {                                    // BINGET
        const key = r.u8();
        if (!memo.has(key)) throw new PickleError(`memo miss ${key}`);
        stack.push(memo.get(key));
        break;
      }
      case 0x6a: {                                    // LONG_BINGET
        const key = r.u32();
        if (!memo.has(key)) throw new PickleError(`memo miss ${key}`);
        stack.push(memo.get(key));
        break;
      }
      case 0x67: {                                    // GET
        const key = parseInt(r.line(), 10);
        if (!memo.has(key)) throw new PickleError(`memo miss ${key}`);
        stack.push(memo.get(key));
        break;
      }
      case 0x52: {                                    // REDUCE
        const args = pop(), callable = pop();
        if (!Array.isArray(args)) {
          throw new PickleError("REDUCE arguments must be a tuple");
        }
        stack.push(reduce(callable, args));
        break;
      }
      case 0x81: {                                    // NEWOBJ
        pop(); // constructor arguments, unused by the supported classes
        stack.push(newObj(pop()));
        break;
      }
      case 0x62: {                                    // BUILD
        const state = pop();
        stack.push(build(pop(), state));
        break;
      }
      case 0x30: pop(); break;                        // POP
      case 0x31: popMark(); break;                    // POP_MARK
      default:
        throw new PickleError(
          `unsupported opcode 0x${op.toString(16)} at offset ${at}`);
    }
  }
}
