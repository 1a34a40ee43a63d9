func (c *Cache) Fill(keys []string) {
	var wg sync.WaitGroup
	for _, k := range keys {
		wg.Add(1)
		go func(k string) {
			defer wg.Done()
			v := c.load(k)
			c.mu.Lock()
			c.items[k] = v
			c.mu.Unlock()
		}(k)
	}
	wg.Wait()
}
