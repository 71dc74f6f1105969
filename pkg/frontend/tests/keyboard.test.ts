import assert from "node:assert/strict";
import { test } from "node:test";

import { KEY_BINDINGS, bindKeys, labelForKey } from "../src/keyboard.js";
import { HARD_SKIP, LABEL_CLASSES } from "../src/types.js";

test("digits 1-8 map to the eight classes in order", () => {
  for (let i = 0; i < 8; i++) {
    assert.equal(labelForKey(String(i + 1)), LABEL_CLASSES[i]);
  }
});

test("digit 9 is the hard/skip mark", () => {
  assert.equal(labelForKey("9"), HARD_SKIP);
});

test("other keys are ignored", () => {
  assert.equal(labelForKey("0"), null);
  assert.equal(labelForKey("a"), null);
  assert.equal(labelForKey("Enter"), null);
});

test("there are exactly nine bindings with unique keys", () => {
  assert.equal(KEY_BINDINGS.length, 9);
  assert.equal(new Set(KEY_BINDINGS.map((b) => b.key)).size, 9);
});

class FakeTarget {
  handler: ((ev: unknown) => void) | null = null;
  addEventListener(_type: string, fn: (ev: unknown) => void) {
    this.handler = fn;
  }
  removeEventListener() {
    this.handler = null;
  }
}

function keyEvent(key: string, tagName = "BODY") {
  return {
    key,
    target: { tagName },
    prevented: false,
    preventDefault() {
      this.prevented = true;
    },
  };
}

test("bindKeys fires the callback and prevents default", () => {
  const target = new FakeTarget();
  const seen: string[] = [];
  const detach = bindKeys(target as never, (label) => seen.push(label));
  const ev = keyEvent("1");
  target.handler!(ev);
  assert.deepEqual(seen, ["AI"]);
  assert.ok(ev.prevented);
  detach();
  assert.equal(target.handler, null);
});

test("keystrokes inside inputs are left alone", () => {
  const target = new FakeTarget();
  const seen: string[] = [];
  bindKeys(target as never, (label) => seen.push(label));
  target.handler!(keyEvent("1", "INPUT"));
  target.handler!(keyEvent("2", "TEXTAREA"));
  assert.deepEqual(seen, []);
});
