package scanner

import (
	"time"

	"example.com/scanner/sharding"
)

type shardLock struct {
	owner string
}

type Scanner[ROW any] struct {
	shardCtrl sharding.Controller
	interval  time.Duration
	lockMap   map[sharding.ShardKey]shardLock
	stop      chan struct{}
}

func (t *Scanner[ROW]) runForever() {
	for {
		select {
		case <-t.stop:
			return
		case <-time.After(t.interval):
		}
		go t.runShards()
	}
}

func (t *Scanner[ROW]) runShards() {
	newShards := t.shardCtrl.MyShards()
	for removedShard := range t.lockMap {
		if _, ok := newShards[removedShard]; !ok {
			delete(t.lockMap, removedShard)
		}
	}
}
