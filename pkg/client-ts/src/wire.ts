/**
 * Binary wire codec for the biohub bus protocol.
 *
 * Frame layout (little-endian):
 *   magic u16 = 0xB105 | version u8 = 1 | frame_kind u8 | topic_id u16
 *   | seq u32 | t_wall_ns u64 | t_mono_ns u64 | msg_kind u8
 *   | payload_len u16 | payload
 *
 * Frame kinds: 1 data, 2 topic announce, 3 param set, 4 param ack,
 * 5 subscribe. Message kinds: 1 F32, 2 F32Array, 3 U8, 4 U16, 5 Empty.
 */

export const MAGIC = 0xb105;
export const VERSION = 1;
export const HEADER_SIZE = 29;
export const MAX_ARRAY_LEN = Math.floor((65535 - 2) / 4);

export enum FrameKind {
  Data = 1,
  Announce = 2,
  ParamSet = 3,
  ParamAck = 4,
  Subscribe = 5,
}

export enum MsgKind {
  F32 = 1,
  F32Array = 2,
  U8 = 3,
  U16 = 4,
  Empty = 5,
}

export enum ParamKey {
  SensorEnable = 1,
  ChunkEnable = 2,
  ChunkLength = 3,
}

export const PARAM_KEY_NAMES: Record<string, ParamKey> = {
  Sensor_Enable: ParamKey.SensorEnable,
  Chunk_Enable: ParamKey.ChunkEnable,
  Chunk_Length: ParamKey.ChunkLength,
};

export enum ParamStatus {
  Ok = 0,
  NodeNotFound = 1,
  ParamError = 2,
}

export class ProtocolError extends Error {}

/** Thrown when a buffer ends mid-frame; callers should wait for more bytes. */
export class NeedMoreBytes extends Error {}

export interface Frame {
  kind: FrameKind;
  topicId: number;
  seq: number;
  tWallNs: bigint;
  tMonoNs: bigint;
  msgKind: number;
  payload: Buffer;
}

export function makeFrame(partial: Partial<Frame> & { kind: FrameKind }): Frame {
  return {
    topicId: 0,
    seq: 0,
    tWallNs: 0n,
    tMonoNs: 0n,
    msgKind: 0,
    payload: Buffer.alloc(0),
    ...partial,
  };
}

export function encodeFrame(f: Frame): Buffer {
  if (f.payload.length > 0xffff) {
    throw new ProtocolError(`payload of ${f.payload.length} bytes exceeds u16 length`);
  }
  const head = Buffer.alloc(HEADER_SIZE);
  head.writeUInt16LE(MAGIC, 0);
  head.writeUInt8(VERSION, 2);
  head.writeUInt8(f.kind, 3);
  head.writeUInt16LE(f.topicId, 4);
  head.writeUInt32LE(f.seq, 6);
  head.writeBigUInt64LE(f.tWallNs, 10);
  head.writeBigUInt64LE(f.tMonoNs, 18);
  head.writeUInt8(f.msgKind, 26);
  head.writeUInt16LE(f.payload.length, 27);
  return Buffer.concat([head, f.payload]);
}

/** Decode one frame at `offset`; returns the frame and bytes consumed. */
export function decodeFrame(buf: Buffer, offset = 0): { frame: Frame; consumed: number } {
  if (buf.length - offset < HEADER_SIZE) {
    throw new NeedMoreBytes(`have ${buf.length - offset} bytes, need ${HEADER_SIZE}`);
  }
  const magic = buf.readUInt16LE(offset);
  if (magic !== MAGIC) {
    throw new ProtocolError(`bad magic 0x${magic.toString(16)}`);
  }
  const version = buf.readUInt8(offset + 2);
  if (version !== VERSION) {
    throw new ProtocolError(`unsupported protocol version ${version}`);
  }
  const kind = buf.readUInt8(offset + 3);
  if (kind < 1 || kind > 5) {
    throw new ProtocolError(`unknown frame kind ${kind}`);
  }
  const msgKind = buf.readUInt8(offset + 26);
  if (msgKind > 5) {
    throw new ProtocolError(`unknown message kind ${msgKind}`);
  }
  const payloadLen = buf.readUInt16LE(offset + 27);
  if (buf.length - offset < HEADER_SIZE + payloadLen) {
    throw new NeedMoreBytes(`payload needs ${payloadLen} more bytes`);
  }
  const frame: Frame = {
    kind,
    topicId: buf.readUInt16LE(offset + 4),
    seq: buf.readUInt32LE(offset + 6),
    tWallNs: buf.readBigUInt64LE(offset + 10),
    tMonoNs: buf.readBigUInt64LE(offset + 18),
    msgKind,
    payload: Buffer.from(
      buf.subarray(offset + HEADER_SIZE, offset + HEADER_SIZE + payloadLen),
    ),
  };
  return { frame, consumed: HEADER_SIZE + payloadLen };
}

/** Incremental frame splitter for a byte stream. */
export class FrameSplitter {
  private buf: Buffer = Buffer.alloc(0);

  feed(data: Buffer): Frame[] {
    this.buf = this.buf.length === 0 ? Buffer.from(data) : Buffer.concat([this.buf, data]);
    const out: Frame[] = [];
    let pos = 0;
    for (;;) {
      try {
        const { frame, consumed } = decodeFrame(this.buf, pos);
        out.push(frame);
        pos += consumed;
      } catch (err) {
        if (err instanceof NeedMoreBytes) break;
        throw err;
      }
    }
    this.buf = Buffer.from(this.buf.subarray(pos));
    return out;
  }
}

// -- payload codecs ----------------------------------------------------------

export function encodePayload(kind: MsgKind, values: number[] | null): Buffer {
  switch (kind) {
    case MsgKind.F32: {
      const b = Buffer.alloc(4);
      b.writeFloatLE(values![0]!, 0);
      return b;
    }
    case MsgKind.F32Array: {
      const vals = values ?? [];
      if (vals.length > MAX_ARRAY_LEN) {
        throw new ProtocolError(`array of ${vals.length} exceeds ${MAX_ARRAY_LEN}`);
      }
      const b = Buffer.alloc(2 + 4 * vals.length);
      b.writeUInt16LE(vals.length, 0);
      vals.forEach((v, i) => b.writeFloatLE(v, 2 + 4 * i));
      return b;
    }
    case MsgKind.U8: {
      const b = Buffer.alloc(1);
      b.writeUInt8(values![0]!, 0);
      return b;
    }
    case MsgKind.U16: {
      const b = Buffer.alloc(2);
      b.writeUInt16LE(values![0]!, 0);
      return b;
    }
    case MsgKind.Empty:
      return Buffer.alloc(0);
  }
}

export function decodePayload(kind: MsgKind, payload: Buffer): number[] {
  switch (kind) {
    case MsgKind.F32:
      if (payload.length !== 4) throw new ProtocolError("F32 payload must be 4 bytes");
      return [payload.readFloatLE(0)];
    case MsgKind.F32Array: {
      if (payload.length < 2) throw new ProtocolError("truncated F32Array payload");
      const count = payload.readUInt16LE(0);
      if (payload.length !== 2 + 4 * count) {
        throw new ProtocolError(
          `F32Array declares ${count} values but carries ${payload.length - 2} bytes`,
        );
      }
      const out: number[] = new Array(count);
      for (let i = 0; i < count; i++) out[i] = payload.readFloatLE(2 + 4 * i);
      return out;
    }
    case MsgKind.U8:
      if (payload.length !== 1) throw new ProtocolError("U8 payload must be 1 byte");
      return [payload.readUInt8(0)];
    case MsgKind.U16:
      if (payload.length !== 2) throw new ProtocolError("U16 payload must be 2 bytes");
      return [payload.readUInt16LE(0)];
    case MsgKind.Empty:
      if (payload.length !== 0) throw new ProtocolError("Empty payload must be 0 bytes");
      return [];
    default:
      throw new ProtocolError(`unknown message kind ${kind}`);
  }
}

// -- control frame helpers ---------------------------------------------------

export function encodeAnnounce(
  name: string,
  msgKind: MsgKind,
  topicId = 0,
  pubCount = 0,
): Frame {
  const raw = Buffer.from(name, "utf8");
  const payload = Buffer.alloc(2 + raw.length + 2);
  payload.writeUInt16LE(raw.length, 0);
  raw.copy(payload, 2);
  payload.writeUInt16LE(pubCount, 2 + raw.length);
  return makeFrame({ kind: FrameKind.Announce, topicId, msgKind, payload });
}

export interface Announce {
  name: string;
  msgKind: MsgKind;
  topicId: number;
  pubCount: number;
}

export function decodeAnnounce(f: Frame): Announce {
  if (f.payload.length < 4) throw new ProtocolError("truncated announce payload");
  const nameLen = f.payload.readUInt16LE(0);
  if (f.payload.length !== 2 + nameLen + 2) {
    throw new ProtocolError("announce payload length mismatch");
  }
  return {
    name: f.payload.subarray(2, 2 + nameLen).toString("utf8"),
    msgKind: f.msgKind,
    topicId: f.topicId,
    pubCount: f.payload.readUInt16LE(2 + nameLen),
  };
}

export interface ParamMessage {
  token: number;
  key: ParamKey;
  status: ParamStatus;
  value: number;
  node: string;
}

export function encodeParam(kind: FrameKind, msg: ParamMessage): Frame {
  const node = Buffer.from(msg.node, "utf8");
  const payload = Buffer.alloc(10 + node.length);
  payload.writeUInt32LE(msg.token, 0);
  payload.writeUInt8(msg.key, 4);
  payload.writeUInt8(msg.status, 5);
  payload.writeUInt32LE(msg.value, 6);
  node.copy(payload, 10);
  return makeFrame({ kind, payload });
}

export function decodeParam(f: Frame): ParamMessage {
  if (f.payload.length < 10) throw new ProtocolError("truncated param payload");
  return {
    token: f.payload.readUInt32LE(0),
    key: f.payload.readUInt8(4),
    status: f.payload.readUInt8(5),
    value: f.payload.readUInt32LE(6),
    node: f.payload.subarray(10).toString("utf8"),
  };
}

export function encodeSubscribe(pattern: string): Frame {
  return makeFrame({ kind: FrameKind.Subscribe, payload: Buffer.from(pattern, "utf8") });
}
