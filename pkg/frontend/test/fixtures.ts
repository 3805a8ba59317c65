import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURES = join(dirname(dirname(fileURLToPath(import.meta.url))), "fixtures");

export function fixtureText(name: string): string {
  return readFileSync(join(FIXTURES, name), "utf-8");
}

export function fixture<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}
