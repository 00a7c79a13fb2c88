/** Task launch forms. Field lists are data, not markup, so executor params
 * can be generated straight from the registered manifest. */

import type { ManifestView, ParamSpec } from "./types.js";

export interface FieldSpec {
  name: string;
  label: string;
  kind: "text" | "number" | "boolean" | "snapshot" | "select";
  required: boolean;
  defaultValue?: string | number | boolean;
  options?: string[];
}

export interface FormValues {
  [name: string]: string | number | boolean | undefined;
}

function paramField(param: ParamSpec): FieldSpec {
  const kind = param.type === "bool" ? "boolean" : param.type === "str" ? "text" : "number";
  return {
    name: `param:${param.key}`,
    label: param.key,
    kind,
    required: param.required,
    defaultValue: param.default ?? undefined,
  };
}

export function trainFormFields(manifest: ManifestView): FieldSpec[] {
  return [
    { name: "train", label: "training snapshot", kind: "snapshot", required: true },
    { name: "val", label: "validation snapshot", kind: "snapshot", required: true },
    ...manifest.params.map(paramField),
  ];
}

export function mineFormFields(manifest: ManifestView): FieldSpec[] {
  return [
    { name: "candidates", label: "candidate snapshot", kind: "snapshot", required: true },
    { name: "batch_size", label: "batch size", kind: "number", required: true, defaultValue: 50 },
    ...manifest.params.map(paramField),
  ];
}

export function labelFormFields(classNames: string[]): FieldSpec[] {
  return [
    { name: "dataset", label: "dataset snapshot", kind: "snapshot", required: true },
    {
      name: "classes",
      label: "classes",
      kind: "text",
      required: true,
      defaultValue: classNames.join(","),
    },
    { name: "instructions", label: "instructions", kind: "text", required: false },
    { name: "doc_url", label: "documentation link", kind: "text", required: false },
    { name: "pre_annotate", label: "pre-annotate with current model", kind: "boolean", required: false },
  ];
}

export function importFormFields(): FieldSpec[] {
  return [
    { name: "source_dir", label: "source directory", kind: "text", required: true },
    {
      name: "format",
      label: "format",
      kind: "select",
      required: true,
      options: ["yolo-txt", "voc-xml-subset", "flat-unlabeled"],
    },
    {
      name: "policy",
      label: "unknown label policy",
      kind: "select",
      required: false,
      options: ["ignore", "abort", "add"],
      defaultValue: "ignore",
    },
    { name: "class_names", label: "classes", kind: "text", required: true },
  ];
}

export function validate(fields: FieldSpec[], values: FormValues): string[] {
  const errors: string[] = [];
  for (const field of fields) {
    const value = values[field.name] ?? field.defaultValue;
    if (field.required && (value === undefined || value === "")) {
      errors.push(`${field.label} is required`);
    }
    if (field.kind === "number" && value !== undefined && value !== "") {
      if (typeof value !== "number" && Number.isNaN(Number(value))) {
        errors.push(`${field.label} must be a number`);
      }
    }
  }
  return errors;
}

function collectParams(fields: FieldSpec[], values: FormValues): Record<string, unknown> {
  const params: Record<string, unknown> = {};
  for (const field of fields) {
    if (!field.name.startsWith("param:")) continue;
    const value = values[field.name] ?? field.defaultValue;
    if (value === undefined || value === "") continue;
    params[field.name.slice("param:".length)] =
      field.kind === "number" ? Number(value) : value;
  }
  return params;
}

/** Request body for POST /api/tasks from a train or mine form. */
export function buildTaskRequest(
  kind: "train" | "mine",
  manifest: ManifestView,
  fields: FieldSpec[],
  values: FormValues,
  classNames: string[],
  modelFiles: string[] = [],
): Record<string, unknown> {
  const snapshots: Record<string, string> = {};
  for (const field of fields) {
    if (field.kind === "snapshot" && values[field.name] !== undefined) {
      snapshots[field.name] = String(values[field.name]);
    }
  }
  return {
    kind,
    executor: { name: manifest.name, version: manifest.version },
    snapshots,
    class_names: classNames,
    params: collectParams(fields, values),
    model_files: modelFiles,
  };
}

/** Request body for POST /api/labels; includes the current model as
 * pre-annotation source when the toggle is on. */
export function buildLabelRequest(
  values: FormValues,
  currentModel: string | null,
): Record<string, unknown> {
  const body: Record<string, unknown> = {
    dataset: values["dataset"],
    classes: String(values["classes"] ?? "")
      .split(",")
      .map((c) => c.trim())
      .filter((c) => c.length > 0),
    instructions: values["instructions"] ?? "",
  };
  if (values["doc_url"]) body["doc_url"] = values["doc_url"];
  if (values["pre_annotate"] && currentModel) body["model"] = currentModel;
  return body;
}
