package sharding

type ShardKey string

type Controller interface {
	MyShards() map[ShardKey]bool
}
