// Version gallery model: a pure function of the latest list_versions
// snapshot, so reloading and re-fetching reconstructs it exactly.

import { VersionEntry } from "./rpc.js";

export interface GalleryNode {
  label: string;
  parent: string | null;
  previewUrl: string;
  depth: number;
  suggestionCount: number | null;
}

export class GalleryModel {
  readonly nodes: GalleryNode[];
  private byLabel = new Map<string, GalleryNode>();
  selected: string | null = null;

  constructor(
    snapshot: VersionEntry[],
    previewUrlFor: (label: string) => string,
  ) {
    const depths = new Map<string, number>();
    this.nodes = snapshot.map((entry) => {
      const depth = entry.parent === null ? 0 : (depths.get(entry.parent) ?? 0) + 1;
      depths.set(entry.label, depth);
      return {
        label: entry.label,
        parent: entry.parent,
        previewUrl: previewUrlFor(entry.label),
        depth,
        suggestionCount: entry.critique_summary?.suggestion_count ?? null,
      };
    });
    for (const node of this.nodes) {
      this.byLabel.set(node.label, node);
    }
    if (this.nodes.length > 0) {
      this.selected = this.nodes[this.nodes.length - 1].label;
    }
  }

  get(label: string): GalleryNode | undefined {
    return this.byLabel.get(label);
  }

  select(label: string): void {
    if (!this.byLabel.has(label)) {
      throw new Error(`unknown version: ${label}`);
    }
    this.selected = label;
  }

  children(label: string): GalleryNode[] {
    return this.nodes.filter((n) => n.parent === label);
  }

  /** Labels with more than one child, i.e. visible forks in the tree. */
  forkPoints(): string[] {
    const counts = new Map<string, number>();
    for (const node of this.nodes) {
      if (node.parent !== null) {
        counts.set(node.parent, (counts.get(node.parent) ?? 0) + 1);
      }
    }
    return [...counts.entries()].filter(([, n]) => n > 1).map(([label]) => label);
  }
}
