/**
 * TCP bus client: subscribe to topics, receive data frames, publish, and
 * set node parameters. Talks only the binary wire protocol; it has no
 * knowledge of the broker's implementation.
 */

import * as net from "node:net";

import {
  Frame,
  FrameKind,
  FrameSplitter,
  MsgKind,
  ParamKey,
  ParamStatus,
  PARAM_KEY_NAMES,
  decodeAnnounce,
  decodeParam,
  decodePayload,
  encodeAnnounce,
  encodeFrame,
  encodeParam,
  encodeSubscribe,
  makeFrame,
} from "./wire.js";

export class BusTimeout extends Error {}
export class ConnectionLost extends Error {}
export class NodeNotFound extends Error {}
export class ParamRejected extends Error {}

export interface TopicFrame {
  topic: string;
  kind: MsgKind;
  values: number[];
  seq: number;
  tWallNs: bigint;
  tMonoNs: bigint;
  payload: Buffer;
}

interface Waiter {
  resolve: (f: TopicFrame) => void;
  reject: (err: Error) => void;
  timer: NodeJS.Timeout;
}

export class BusClient {
  private socket!: net.Socket;
  private splitter = new FrameSplitter();
  private topicsById = new Map<number, { name: string; msgKind: MsgKind }>();
  private idsByName = new Map<string, number>();
  private queue: TopicFrame[] = [];
  private waiters: Waiter[] = [];
  private announceWaiters = new Map<string, Array<() => void>>();
  private paramWaiters = new Map<
    number,
    { resolve: (v: number) => void; reject: (e: Error) => void }
  >();
  private nextToken = 1;
  private pubSeq = new Map<string, number>();
  private closed = false;
  private lastError: Error | null = null;

  static connect(addr: string, timeoutMs = 5000): Promise<BusClient> {
    const [host, portText] = splitAddr(addr);
    const client = new BusClient();
    return new Promise((resolve, reject) => {
      const socket = net.connect({ host, port: portText, noDelay: true });
      const timer = setTimeout(() => {
        socket.destroy();
        reject(new ConnectionLost(`connect to ${addr} timed out`));
      }, timeoutMs);
      socket.once("connect", () => {
        clearTimeout(timer);
        client.attach(socket);
        resolve(client);
      });
      socket.once("error", (err) => {
        clearTimeout(timer);
        reject(new ConnectionLost(`connect to ${addr} failed: ${err.message}`));
      });
    });
  }

  private attach(socket: net.Socket): void {
    this.socket = socket;
    socket.on("data", (data) => {
      for (const frame of this.splitter.feed(data)) this.handleFrame(frame);
    });
    const fail = (err: Error) => {
      this.lastError = err;
      this.failAllWaiters(err);
    };
    socket.on("error", (err) => fail(new ConnectionLost(err.message)));
    socket.on("close", () => {
      if (!this.closed) fail(new ConnectionLost("connection closed"));
    });
  }

  private failAllWaiters(err: Error): void {
    for (const w of this.waiters.splice(0)) {
      clearTimeout(w.timer);
      w.reject(err);
    }
    for (const [, p] of this.paramWaiters) p.reject(err);
    this.paramWaiters.clear();
  }

  private handleFrame(frame: Frame): void {
    switch (frame.kind) {
      case FrameKind.Announce: {
        const ann = decodeAnnounce(frame);
        this.topicsById.set(ann.topicId, { name: ann.name, msgKind: ann.msgKind });
        this.idsByName.set(ann.name, ann.topicId);
        const pending = this.announceWaiters.get(ann.name);
        if (pending) {
          this.announceWaiters.delete(ann.name);
          for (const fn of pending) fn();
        }
        break;
      }
      case FrameKind.Data: {
        const topic = this.topicsById.get(frame.topicId);
        if (!topic) return; // broker sends the announce first; never valid
        const tf: TopicFrame = {
          topic: topic.name,
          kind: frame.msgKind,
          values: decodePayload(frame.msgKind, frame.payload),
          seq: frame.seq,
          tWallNs: frame.tWallNs,
          tMonoNs: frame.tMonoNs,
          payload: frame.payload,
        };
        const waiter = this.waiters.shift();
        if (waiter) {
          clearTimeout(waiter.timer);
          waiter.resolve(tf);
        } else {
          this.queue.push(tf);
        }
        break;
      }
      case FrameKind.ParamAck: {
        const msg = decodeParam(frame);
        const pending = this.paramWaiters.get(msg.token);
        if (!pending) return;
        this.paramWaiters.delete(msg.token);
        if (msg.status === ParamStatus.Ok) pending.resolve(msg.value);
        else if (msg.status === ParamStatus.NodeNotFound)
          pending.reject(new NodeNotFound(`no node named ${msg.node}`));
        else pending.reject(new ParamRejected(`parameter rejected for ${msg.node}`));
        break;
      }
      default:
        break; // param-set and subscribe frames are not addressed to clients
    }
  }

  private send(frame: Frame): void {
    if (this.lastError) throw this.lastError;
    this.socket.write(encodeFrame(frame));
  }

  subscribe(patterns: string | string[]): void {
    for (const p of Array.isArray(patterns) ? patterns : [patterns]) {
      this.send(encodeSubscribe(p));
    }
  }

  /** Next queued data frame, in arrival order across all subscriptions. */
  nextFrame(timeoutMs = 5000): Promise<TopicFrame> {
    const queued = this.queue.shift();
    if (queued) return Promise.resolve(queued);
    if (this.lastError) return Promise.reject(this.lastError);
    return new Promise((resolve, reject) => {
      const waiter: Waiter = {
        resolve,
        reject,
        timer: setTimeout(() => {
          const i = this.waiters.indexOf(waiter);
          if (i >= 0) this.waiters.splice(i, 1);
          reject(new BusTimeout(`no frame within ${timeoutMs} ms`));
        }, timeoutMs),
      };
      this.waiters.push(waiter);
    });
  }

  async collectFrames(count: number, timeoutMs = 30000): Promise<TopicFrame[]> {
    const deadline = Date.now() + timeoutMs;
    const out: TopicFrame[] = [];
    while (out.length < count) {
      const left = deadline - Date.now();
      if (left <= 0) throw new BusTimeout(`collected ${out.length}/${count} frames`);
      out.push(await this.nextFrame(left));
    }
    return out;
  }

  /** Announce a topic; resolves once the broker echoes the assigned id. */
  announce(name: string, msgKind: MsgKind, timeoutMs = 5000): Promise<number> {
    if (this.idsByName.has(name)) {
      return Promise.resolve(this.idsByName.get(name)!);
    }
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new BusTimeout(`announce of ${name} not confirmed`)),
        timeoutMs,
      );
      const arr = this.announceWaiters.get(name) ?? [];
      arr.push(() => {
        clearTimeout(timer);
        resolve(this.idsByName.get(name)!);
      });
      this.announceWaiters.set(name, arr);
      this.send(encodeAnnounce(name, msgKind));
    });
  }

  async publish(topic: string, kind: MsgKind, payload: Buffer): Promise<void> {
    const topicId = this.idsByName.get(topic);
    if (topicId === undefined) {
      throw new Error(`topic ${topic} must be announced before publishing`);
    }
    const seq = this.pubSeq.get(topic) ?? 0;
    this.pubSeq.set(topic, seq + 1);
    const nowNs = BigInt(Date.now()) * 1_000_000n;
    const monoNs = process.hrtime.bigint();
    this.send(
      makeFrame({
        kind: FrameKind.Data,
        topicId,
        seq,
        tWallNs: nowNs,
        tMonoNs: monoNs,
        msgKind: kind,
        payload,
      }),
    );
  }

  /** Set a runtime parameter on a sensor node; resolves the applied value. */
  setParam(
    node: string,
    key: ParamKey | keyof typeof PARAM_KEY_NAMES,
    value: number | boolean,
    timeoutMs = 5000,
  ): Promise<number> {
    const keyCode = typeof key === "number" ? key : PARAM_KEY_NAMES[key];
    if (keyCode === undefined) {
      return Promise.reject(new Error(`unknown parameter key ${String(key)}`));
    }
    const token = this.nextToken++;
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.paramWaiters.delete(token);
        reject(new BusTimeout(`no ack for ${node} within ${timeoutMs} ms`));
      }, timeoutMs);
      this.paramWaiters.set(token, {
        resolve: (v) => {
          clearTimeout(timer);
          resolve(v);
        },
        reject: (e) => {
          clearTimeout(timer);
          reject(e);
        },
      });
      this.send(
        encodeParam(FrameKind.ParamSet, {
          token,
          key: keyCode,
          status: ParamStatus.Ok,
          value: Number(value),
          node,
        }),
      );
    });
  }

  knownTopics(): Array<{ name: string; msgKind: MsgKind }> {
    return [...this.topicsById.values()].sort((a, b) => a.name.localeCompare(b.name));
  }

  close(): void {
    this.closed = true;
    this.socket.destroy();
  }
}

function splitAddr(addr: string): [string, number] {
  const i = addr.lastIndexOf(":");
  if (i < 0) throw new Error(`address must be host:port, got ${addr}`);
  const port = Number(addr.slice(i + 1));
  if (!Number.isInteger(port) || port < 1 || port > 65535) {
    throw new Error(`bad port in ${addr}`);
  }
  return [addr.slice(0, i), port];
}
