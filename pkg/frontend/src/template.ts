// Pair templates: plain text with {field} placeholders filled from a
// record. Substitution is strict so a silent formatting bug cannot
// feed half-empty prompts to the backbone.

export class TemplateError extends Error {}

export const DEFAULT_TEMPLATE = "A: {text_a}\nB: {text_b}";

export function buildInput(fields: Record<string, string>, template: string): string {
  return template.replace(/\{(\w+)\}/g, (_, name: string) => {
    const value = fields[name];
    if (value === undefined) {
      throw new TemplateError(`template references missing field '${name}'`);
    }
    if (value === "") {
      throw new TemplateError(`template field '${name}' is empty`);
    }
    return value;
  });
}

export function placeholders(template: string): string[] {
  return [...template.matchAll(/\{(\w+)\}/g)].map((m) => m[1]);
}
